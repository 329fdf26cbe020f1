"""Spectral functionals of a SpectralTable at a point of the surface.

Everything here treats an eigenvalue cluster of the table as one exact
eigenvalue located at the cluster mean, so numerically split degenerate
eigenvalues step together.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .spectrum import NoClusterError, SpectralTable

__all__ = [
    "WeylSeries",
    "GrowthFit",
    "ReturnMeasure",
    "GlobalWeyl",
    "local_weyl_series",
    "sup_norm_functional",
    "maximizing_coefficients",
    "sup_norm_pairs",
    "remainder_pairs",
    "growth_exponent_fit",
    "return_time_measure",
    "global_weyl",
    "trace_integral",
    "main_term",
]

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
BINS_PER_DECADE = 8
# offset used to evaluate E just below a cluster
BELOW = 1e-9


def main_term(lam) -> np.ndarray:
    """Pointwise main term lambda^2 / (4 pi) of the two-dimensional local Weyl law."""
    lam = np.asarray(lam, dtype=float)
    return lam * lam / FOUR_PI


def _point(point) -> tuple:
    if np.ndim(point) == 0:
        return float(point), 0.0
    x, theta = point
    return float(x), float(theta)


def _check_resolution(table: SpectralTable, x: float) -> None:
    if table.kind != "numeric" or not table.modes:
        return
    h = table.modes[0].grid.h
    if h > (2 * math.pi / max(table.lambda_max, 1e-12)) / 10.0:
        log.warning("table grid spacing %.3g under-resolves lambda_max=%g at x=%g",
                    h, table.lambda_max, x)


def _entry_levels(table: SpectralTable) -> np.ndarray:
    return table.cluster_lambdas[table.cluster_ids]


@dataclass
class WeylSeries:
    point: tuple
    lambdas: np.ndarray
    E: np.ndarray
    main: np.ndarray
    R: np.ndarray

    def remainder_constant(self) -> float:
        """Smallest C with |R| <= C * lambda on the sampled lambda >= 1."""
        big = self.lambdas >= 1.0
        if not big.any():
            return 0.0
        return float(np.max(np.abs(self.R[big]) / self.lambdas[big]))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "E", "main", "R"])
            for row in zip(self.lambdas, self.E, self.main, self.R):
                w.writerow([repr(float(v)) for v in row])
        return path


def _cumulative(table: SpectralTable, dens: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    levels = _entry_levels(table)
    order = np.argsort(levels, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(dens[order])])
    counts = np.searchsorted(levels[order], lambdas, side="right")
    return csum[counts]


def local_weyl_series(table: SpectralTable, point, lambda_grid) -> WeylSeries:
    """E_lambda(x, x), its main term and remainder on an increasing lambda grid."""
    x, theta = _point(point)
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.size and (lams.min() < 0 or lams.max() > table.lambda_max * (1 + 1e-12)):
        raise ValueError(f"lambda grid must lie in [0, {table.lambda_max}]")
    if np.any(np.diff(lams) < 0):
        raise ValueError("lambda grid must be increasing")
    _check_resolution(table, x)
    E = _cumulative(table, table.density_at(x), lams)
    main = main_term(lams)
    return WeylSeries((x, theta), lams, E, main, E - main)


def _cluster_members(table: SpectralTable, lam: float) -> np.ndarray:
    return np.flatnonzero(table.cluster_ids == table.cluster_of(lam))


def sup_norm_functional(table: SpectralTable, point, lam: float) -> float:
    """sqrt of the jump of E at the cluster containing lam, evaluated at point."""
    x, _ = _point(point)
    members = _cluster_members(table, lam)
    return float(math.sqrt(np.sum(table.density_at(x)[members])))


def maximizing_coefficients(table: SpectralTable, point, lam: float):
    """Entry indices and unit coefficients of the eigenfunction attaining the sup.

    The optimum over unit combinations sum c_nu phi_nu is c_nu proportional to
    conj(phi_nu(point)).
    """
    x, theta = _point(point)
    members = _cluster_members(table, lam)
    vals = table.values_at(x, theta)[members]
    norm = np.linalg.norm(vals)
    if norm == 0:
        coeffs = np.zeros(members.size, dtype=complex)
        coeffs[0] = 1.0
        return members, coeffs
    return members, np.conj(vals) / norm


def sup_norm_pairs(table: SpectralTable, point, lam_lo: float = 0.0,
                   lam_hi: float | None = None, floor: float = 0.0) -> list:
    """(cluster lambda, sup-norm functional) for every cluster in [lam_lo, lam_hi].

    Clusters whose value does not exceed ``floor`` are dropped.
    """
    x, _ = _point(point)
    lam_hi = table.lambda_max if lam_hi is None else lam_hi
    dens = table.density_at(x)
    jumps = np.bincount(table.cluster_ids, weights=dens, minlength=table.cluster_lambdas.size)
    out = []
    for lam, jump in zip(table.cluster_lambdas, jumps):
        if lam_lo <= lam <= lam_hi and math.sqrt(jump) > floor:
            out.append((float(lam), float(math.sqrt(jump))))
    return out


def remainder_pairs(table: SpectralTable, point, lam_lo: float, lam_hi: float) -> list:
    """(lambda, |R(lambda, x)|) sampled just below and at every cluster in range.

    The supremum of |R| on an interval between clusters is attained at one of
    these one-sided limits, because the main term is monotone.
    """
    x, _ = _point(point)
    c = table.cluster_lambdas
    c = c[(c >= lam_lo) & (c <= lam_hi) & (c > 0)]
    lams = np.sort(np.concatenate([c * (1 - BELOW), c]))
    series = local_weyl_series(table, (x, 0.0), lams)
    return [(float(a), float(abs(b))) for a, b in zip(series.lambdas, series.R) if abs(b) > 0]


@dataclass
class GrowthFit:
    pairs: list
    exponent: float
    intercept: float
    residual: float
    method: str
    envelope: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["pairs"] = [list(p) for p in self.pairs]
        d["envelope"] = [list(p) for p in self.envelope]
        return d


def growth_exponent_fit(pairs: Sequence, bins: int | None = None,
                        bins_per_decade: int = BINS_PER_DECADE) -> GrowthFit:
    """Least-squares slope of log(bin max) against log(lambda) over geometric bins.

    Each bin is represented by its largest value and the lambda where that value
    occurs.  ``bins`` overrides the per-decade default.
    """
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    lam, val = arr[:, 0], arr[:, 1]
    if np.any(lam <= 0) or np.any(val <= 0):
        raise ValueError("growth fit needs positive lambdas and values")
    lo, hi = float(lam.min()), float(lam.max())
    if not hi > lo:
        raise ValueError("growth fit needs more than one distinct lambda")
    if bins is None:
        bins = max(3, int(math.ceil(bins_per_decade * math.log10(hi / lo))))
    edges = np.geomspace(lo, hi, bins + 1)
    which = np.clip(np.searchsorted(edges, lam, side="right") - 1, 0, bins - 1)
    env = []
    for b in range(bins):
        sel = np.flatnonzero(which == b)
        if sel.size:
            k = sel[np.argmax(val[sel])]
            env.append((float(lam[k]), float(val[k])))
    if len(env) < 3:
        raise ValueError(f"growth fit needs at least 3 nonempty bins, got {len(env)}")
    e = np.asarray(env)
    X, Y = np.log(e[:, 0]), np.log(e[:, 1])
    slope, intercept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    method = f"upper-envelope: max per geometric bin, {bins} bins over [{lo:.6g}, {hi:.6g}]"
    return GrowthFit([tuple(map(float, p)) for p in arr], float(slope), float(intercept),
                     resid, method, env)


@dataclass
class ReturnMeasure:
    T: float
    lam: float
    point: tuple
    coefficients: dict

    @property
    def max_nontrivial(self) -> float:
        """max over 1 <= k <= k_max of |mu_hat(k)|; small iff the measure is near uniform."""
        return max(abs(v) for k, v in self.coefficients.items() if k >= 1)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "re", "im", "abs"])
            for k in sorted(self.coefficients):
                v = self.coefficients[k]
                w.writerow([k, repr(v.real), repr(v.imag), repr(abs(v))])
        return path


def return_time_measure(table: SpectralTable, point, T: float, lam: float,
                        k_max: int) -> ReturnMeasure:
    """Fourier coefficients of the weighted phase measure of e^{i T lambda_nu}."""
    if lam > table.lambda_max * (1 + 1e-12):
        raise ValueError(f"lambda {lam} exceeds the table range {table.lambda_max}")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    x, theta = _point(point)
    levels = _entry_levels(table)
    keep = levels <= lam
    w = table.density_at(x)[keep]
    phase = T * levels[keep]
    total = float(np.sum(w))
    coeffs = {0: 1.0 + 0.0j}
    for k in range(1, k_max + 1):
        v = complex(np.sum(w * np.exp(1j * k * phase)) / total)
        coeffs[k] = v
        coeffs[-k] = v.conjugate()
    return ReturnMeasure(float(T), float(lam), (x, theta), coeffs)


@dataclass
class GlobalWeyl:
    lambdas: np.ndarray
    N: np.ndarray
    main: np.ndarray
    R: np.ndarray

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "N", "main", "R"])
            for row in zip(self.lambdas, self.N, self.main, self.R):
                w.writerow([repr(float(v)) for v in row])
        return path


def global_weyl(table: SpectralTable, lambda_grid) -> GlobalWeyl:
    """Counting function with multiplicity and its remainder against Area lambda^2/(4 pi)."""
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.size and lams.max() > table.lambda_max * (1 + 1e-12):
        raise ValueError(f"lambda grid exceeds the table range {table.lambda_max}")
    N = _cumulative(table, np.ones(len(table)), lams)
    main = table.area * main_term(lams)
    return GlobalWeyl(lams, N, main, N - main)


def trace_integral(table: SpectralTable, lam: float, chunk: int = 256) -> float:
    """Integral of E_lambda(x, x) over the surface by the table's own quadrature."""
    nodes, weights = table.quadrature()
    keep = _entry_levels(table) <= lam
    total = 0.0
    for s in range(0, len(nodes), chunk):
        R = table.radial_matrix(nodes[s:s + chunk])[keep]
        total += float(np.sum(np.abs(R) ** 2 @ weights[s:s + chunk]))
    return total


def save_json(obj: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))
    return path


__all__.append("NoClusterError")
