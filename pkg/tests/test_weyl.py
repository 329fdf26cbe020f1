import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from revlab.geometry import FlatTorus
from revlab.spectrum import NoClusterError, analytic_spectrum
from revlab.weyl import (
    global_weyl,
    growth_exponent_fit,
    local_weyl_series,
    main_term,
    maximizing_coefficients,
    remainder_pairs,
    return_time_measure,
    sup_norm_functional,
    sup_norm_pairs,
    trace_integral,
)

from .oracles import FROZEN, flat_mu, sphere_pole_mu, zonal_pole_density


def test_flat_local_weyl_at_five(flat_analytic):
    s = local_weyl_series(flat_analytic, (0.0, 0.0), [5.0])
    assert s.E[0] == pytest.approx(FROZEN["flat_E_5"], rel=1e-12)
    assert s.main[0] == pytest.approx(FROZEN["flat_main_5"], rel=1e-12)
    assert s.R[0] == pytest.approx(FROZEN["flat_R_5"], rel=1e-10)


def test_flat_local_weyl_is_point_independent(flat_analytic):
    lams = np.linspace(0, 40, 101)
    a = local_weyl_series(flat_analytic, (0.0, 0.0), lams)
    b = local_weyl_series(flat_analytic, (2.1, 4.0), lams)
    assert np.allclose(a.E, b.E, rtol=1e-12)


def test_sphere_pole_jump(sphere_table):
    lam10 = math.sqrt(110)
    s = local_weyl_series(sphere_table, 0.0, [lam10 * (1 - 1e-3), lam10 * (1 + 1e-3)])
    assert s.E[1] - s.E[0] == pytest.approx(FROZEN["zonal_pole_density_10"], rel=5e-4)


def test_below_first_eigenvalue(sphere_table):
    s = local_weyl_series(sphere_table, 1.0, [0.5, 1.0])
    assert np.allclose(s.E, 1 / sphere_table.area, rtol=1e-8)


def test_weyl_grid_validation(flat_analytic):
    with pytest.raises(ValueError):
        local_weyl_series(flat_analytic, 0.0, [1.0, 50.0])
    with pytest.raises(ValueError):
        local_weyl_series(flat_analytic, 0.0, [3.0, 2.0])


def test_remainder_constant(flat_analytic):
    s = local_weyl_series(flat_analytic, 0.0, np.linspace(1, 40, 400))
    C = s.remainder_constant()
    assert np.all(np.abs(s.R[s.lambdas >= 1]) <= C * s.lambdas[s.lambdas >= 1] + 1e-15)


def test_flat_sup_norm_functional(flat_analytic):
    assert flat_analytic.multiplicities[flat_analytic.cluster_of(5.0)] == FROZEN["flat_mult_25"]
    assert sup_norm_functional(flat_analytic, (1.0, 2.0), 5.0) == pytest.approx(
        FROZEN["flat_supnorm_5"], rel=1e-12)


def test_sphere_sup_norm_functional(sphere_table):
    v = sup_norm_functional(sphere_table, 0.0, math.sqrt(110))
    assert v == pytest.approx(FROZEN["zonal_pole_supnorm_10"], rel=5e-4)
    # the addition theorem makes the full eigenspace sum point-independent
    assert sup_norm_functional(sphere_table, math.pi / 2, math.sqrt(110)) == pytest.approx(
        v, rel=5e-4)


def test_sup_norm_requires_cluster(flat_analytic):
    with pytest.raises(NoClusterError):
        sup_norm_functional(flat_analytic, 0.0, 5.1)


@given(seed=st.integers(0, 2**31 - 1), x=st.floats(0.1, 3.0), theta=st.floats(0.0, 6.0))
def test_maximizing_coefficients_attain_bound(sphere_analytic, seed, x, theta):
    lam = math.sqrt(56)
    bound = sup_norm_functional(sphere_analytic, x, lam)
    members, c = maximizing_coefficients(sphere_analytic, (x, theta), lam)
    vals = sphere_analytic.values_at(x, theta)[members]
    assert abs(np.sum(c * vals)) == pytest.approx(bound, rel=1e-8, abs=1e-12)
    rng = np.random.default_rng(seed)
    z = rng.normal(size=members.size) + 1j * rng.normal(size=members.size)
    z /= np.linalg.norm(z)
    assert abs(np.sum(z * vals)) <= bound + 1e-12


def test_sup_norm_pairs_floor(sphere_table):
    pairs = sup_norm_pairs(sphere_table, 0.0, 1.0, floor=1e-8)
    assert len(pairs) == 30
    assert all(v == pytest.approx(math.sqrt(zonal_pole_density(l + 1)), rel=1e-3)
               for l, (_, v) in enumerate(pairs))


def test_growth_fit_exact_power():
    lam = np.geomspace(2, 200, 60)
    fit = growth_exponent_fit(list(zip(lam, 3 * lam**0.5)))
    assert fit.exponent == pytest.approx(0.5, abs=1e-6)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-6)
    assert fit.residual <= 1e-10


def test_growth_fit_uses_upper_envelope():
    lam = np.geomspace(2, 200, 200)
    noisy = lam**0.25 * np.where(np.arange(200) % 3 == 0, 1.0, 0.01)
    fit = growth_exponent_fit(list(zip(lam, noisy)))
    assert fit.exponent == pytest.approx(0.25, abs=0.02)


def test_growth_fit_constant_and_errors():
    lam = np.linspace(1, 50, 40)
    assert growth_exponent_fit(list(zip(lam, np.full(40, 2.0)))).exponent == pytest.approx(
        0.0, abs=1e-12)
    with pytest.raises(ValueError):
        growth_exponent_fit([(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)])
    with pytest.raises(ValueError):
        growth_exponent_fit([(2.0, 1.0), (2.0, 3.0)])
    with pytest.raises(ValueError):
        growth_exponent_fit([(1.0, 1.0), (1.01, 1.0)], bins=1)


def test_flat_return_measure_matches_oracle(flat_analytic):
    for T, key in ((1.0, "flat_mu_T1_lam40"), (2 * math.pi, "flat_mu_T2pi_lam40")):
        mu = return_time_measure(flat_analytic, (0.0, 0.0), T, 40.0, 5)
        got = [abs(mu.coefficients[k]) for k in range(1, 6)]
        assert got == pytest.approx(FROZEN[key], rel=1e-9)
        ref = flat_mu(T, 40.0, 5)
        assert [mu.coefficients[k] for k in range(1, 6)] == pytest.approx(ref, rel=1e-9)


def test_return_measure_structure(bridge_small):
    mu = return_time_measure(bridge_small, 0.0, 2.5, 15.0, 4)
    assert mu.coefficients[0] == 1.0
    for k in range(1, 5):
        assert mu.coefficients[-k] == mu.coefficients[k].conjugate()
        assert abs(mu.coefficients[k]) <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        return_time_measure(bridge_small, 0.0, 2.5, 15.0, 0)
    with pytest.raises(ValueError):
        return_time_measure(bridge_small, 0.0, 2.5, 100.0, 3)


def test_sphere_pole_return_measure(sphere_analytic):
    mu = return_time_measure(sphere_analytic, 0.0, 2 * math.pi, 30.0, 1)
    assert mu.coefficients[1] == pytest.approx(sphere_pole_mu(2 * math.pi, 30.0, 1), abs=1e-10)
    assert abs(mu.coefficients[1] + 1) <= 0.15


def test_flat_global_weyl(flat_analytic):
    g = global_weyl(flat_analytic, [5.0])
    assert g.N[0] == FROZEN["flat_count_5"]
    assert g.main[0] == pytest.approx(FROZEN["flat_global_main_5"], rel=1e-12)
    assert g.R[0] == pytest.approx(FROZEN["flat_global_R_5"], rel=1e-10)


@pytest.mark.parametrize("name", ["flat_analytic", "sphere_analytic", "sphere_table",
                                  "bridge_small"])
def test_trace_identity(request, name):
    tbl = request.getfixturevalue(name)
    lam = 0.75 * tbl.lambda_max
    N = global_weyl(tbl, [lam]).N[0]
    assert trace_integral(tbl, lam) == pytest.approx(N, rel=1e-6)


def test_flat_remainder_exponent(flat_analytic):
    fit = growth_exponent_fit(remainder_pairs(flat_analytic, 0.0, 10.0, 40.0))
    assert fit.exponent <= 0.8


def test_sphere_pole_remainder_exponent(sphere_table):
    fit = growth_exponent_fit(remainder_pairs(sphere_table, 0.0, 1.0, 31.0))
    assert fit.exponent >= 0.9


def test_main_term_values():
    assert main_term(0.0) == 0.0
    assert main_term(2.0) == pytest.approx(1 / math.pi)


def test_analytic_flat_scaled_torus():
    tbl = analytic_spectrum(FlatTorus(c=2.0), 6.0)
    s = local_weyl_series(tbl, 0.0, [6.0])
    assert s.E[0] == pytest.approx(len(tbl) / tbl.area, rel=1e-12)
