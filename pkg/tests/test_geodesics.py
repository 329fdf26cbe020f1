import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from revlab.geodesics import (
    NO_LOOP,
    PhasePoint,
    clairaut_integral,
    flow_geodesic,
    hamiltonian,
    jacobi_transfer,
    loop_length,
    loopset_scan,
)

TWO_PI = 2 * math.pi


def _drift(metric, start, t_end=50.0, samples=25):
    _, (_, path) = flow_geodesic(metric, start, t_end, samples=samples)
    p = max(abs(hamiltonian(metric, q) - 1.0) for q in path)
    i = max(abs(clairaut_integral(metric, q) - start.xi_theta) for q in path)
    return p, i


@pytest.mark.parametrize("name", ["sphere", "flat", "bridge", "fourier"])
@given(psi=st.floats(0.01, TWO_PI - 0.01), x0=st.floats(0.3, 2.8))
def test_invariants_conserved(request, name, psi, x0):
    metric = request.getfixturevalue(name)
    start = PhasePoint.from_direction(metric, x0, 0.0, psi)
    p, i = _drift(metric, start)
    assert p <= 1e-8
    assert i <= 1e-8


@pytest.mark.parametrize("name", ["sphere", "bridge", "fourier"])
def test_time_reversal(request, name):
    metric = request.getfixturevalue(name)
    start = PhasePoint.from_direction(metric, 1.0, 0.2, 0.9)
    end = flow_geodesic(metric, start, 50.0)
    back = flow_geodesic(metric, end, -50.0)
    assert np.max(np.abs(np.subtract(back.as_tuple(), start.as_tuple()))) <= 1e-6


def test_from_direction_is_unit(bridge):
    for psi in np.linspace(0, TWO_PI, 7):
        pt = PhasePoint.from_direction(bridge, 0.4, 0.0, psi)
        assert hamiltonian(bridge, pt) == pytest.approx(1.0, abs=1e-15)
        got = pt.direction_angle(bridge)
        assert abs(math.remainder(got - psi, TWO_PI)) <= 1e-12


def test_clairaut_bounded_by_fiber_radius(bridge):
    a0 = bridge.a(np.array([0.3]))[0]
    for psi in np.linspace(0, TWO_PI, 13):
        assert abs(PhasePoint.from_direction(bridge, 0.3, 0.0, psi).xi_theta) <= a0 + 1e-15


def test_meridian_through_pole(sphere):
    start = PhasePoint.from_direction(sphere, 1.0, 0.0, math.pi)  # heading to x = 0
    end = flow_geodesic(sphere, start, 2.0)
    assert end.x == pytest.approx(1.0, abs=1e-12)
    assert end.theta == pytest.approx(math.pi, abs=1e-12)
    assert end.xi_x == pytest.approx(1.0, abs=1e-12)


def test_pole_start_is_unit_meridian(sphere):
    pt = PhasePoint.from_direction(sphere, 0.0, 0.0, 0.7)
    assert (pt.xi_x, pt.xi_theta, pt.theta) == (1.0, 0.0, 0.7)
    assert hamiltonian(sphere, pt) == 1.0


def test_sphere_loop_length(sphere):
    for psi in (0.3, 1.2, 2.5):
        assert loop_length(sphere, (1.0, 0.0), psi, 7.0) == pytest.approx(TWO_PI, abs=1e-8)


def test_flat_torus_loop_lengths(flat):
    assert loop_length(flat, (0.0, 0.0), 0.0, 10.0) == pytest.approx(TWO_PI, abs=1e-8)
    assert loop_length(flat, (0.0, 0.0), math.atan2(2, 1), 20.0) == pytest.approx(
        TWO_PI * math.sqrt(5), abs=1e-7)
    # slope with a large-denominator rational approximant never returns early
    assert loop_length(flat, (0.0, 0.0), math.atan(math.sqrt(2)), 20.0) == NO_LOOP


def test_sphere_loopset_full(sphere):
    rep = loopset_scan(sphere, (1.0, 0.0), TWO_PI + 0.1, n_directions=256)
    assert rep.measure_estimate == pytest.approx(TWO_PI, rel=0.01)
    assert rep.lsp == pytest.approx([TWO_PI], abs=1e-6)


def test_flat_loopset_null(flat):
    rep = loopset_scan(flat, (0.0, 0.0), 20.0, n_directions=512)
    assert 0.0 <= rep.measure_estimate <= 0.02
    assert all(c.time_spread <= 1e-3 for c in rep.components)


def test_pole_base_rejected_unless_analytic(sphere):
    with pytest.raises(ValueError, match="pole"):
        loopset_scan(sphere, (0.0, 0.0), 7.0)
    rep = loopset_scan(sphere, (0.0, 0.0), 7.0, pole_analytic=True)
    assert rep.measure_estimate == TWO_PI
    assert rep.lsp == [TWO_PI]


@pytest.mark.parametrize("kwargs", [{"n_directions": 10}, {"T_max": 0.0}, {"loop_tol": -1.0}])
def test_loopset_rejects_bad_parameters(sphere, kwargs):
    args = {"T_max": 7.0, **kwargs}
    with pytest.raises(ValueError):
        loopset_scan(sphere, (1.0, 0.0), **args)


def test_loopset_serialization(tmp_path, sphere):
    rep = loopset_scan(sphere, (1.0, 0.0), TWO_PI + 0.1, n_directions=128)
    rep.to_csv(tmp_path / "l.csv")
    rep.to_json(tmp_path / "l.json")
    with open(tmp_path / "l.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["psi", "return_time", "return_angle", "clairaut", "smooth_closed"]
    assert len(rows) - 1 == len(rep.loops)
    summary = json.loads((tmp_path / "l.json").read_text())
    assert summary["measure_estimate"] == rep.measure_estimate
    assert summary["lsp"] == rep.lsp
    a0 = sphere.a(np.array([1.0]))[0]
    assert all(abs(r.clairaut) <= a0 + 1e-12 for r in rep.loops)
    assert all(r.smooth_closed for r in rep.loops)


def test_sphere_conjugate_times(sphere):
    res = jacobi_transfer(sphere, (1.0, 0.0), 0.4, TWO_PI + 0.5)
    assert res.conjugate_times == pytest.approx([math.pi, TWO_PI], abs=1e-4)


def test_sphere_meridian_conjugate_times(sphere):
    res = jacobi_transfer(sphere, (1.0, 0.0), 0.0, TWO_PI + 0.5)
    assert res.conjugate_times == pytest.approx([math.pi, TWO_PI], abs=1e-4)


def test_flat_jacobi_transfer(flat):
    res = jacobi_transfer(flat, (0.0, 0.0), 0.8, 7.0)
    assert np.allclose(res.transfer, [[1.0, 7.0], [0.0, 1.0]], atol=1e-10)
    assert res.conjugate_times == []


def test_negative_tolerance_rejected(sphere):
    with pytest.raises(ValueError):
        flow_geodesic(sphere, PhasePoint.from_direction(sphere, 1.0, 0.0, 0.5), 1.0, -1.0)
