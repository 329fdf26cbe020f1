"""Laplace spectrum of a surface of revolution by separation of variables.

An eigenfunction e^{in theta} u(x) satisfies the radial problem

    -(a u')' / a + n^2 u / a^2 = lambda^2 u,

self-adjoint for the weight a(x) dx.  It is discretized by conservative
second-order finite differences and symmetrized by v = sqrt(a) u, giving a
real symmetric tridiagonal matrix (with periodic corners on a torus).
Sphere-type profiles use the half-offset grid x_i = (i + 1/2) h, on which the
pole faces carry a(0) = a(L) = 0 and the n^2/a^2 term is never singular.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from filelock import FileLock
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import FlatTorus, ProfileMetric, RoundSphere, Topology, build_profile_metric

__all__ = [
    "EquivariantMode",
    "SpectralTable",
    "SolverError",
    "GridTooCoarseError",
    "NoClusterError",
    "solve_equivariant_modes",
    "assemble_spectral_table",
    "cached_spectral_table",
    "save_table",
    "load_table",
    "table_cache_key",
    "analytic_spectrum",
    "mode_statistics",
    "lp_exponent",
    "normalized_legendre",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEFAULT_CLUSTER_TOL = 1e-6
CUTOFF_SLACK = 1e-9


class SolverError(RuntimeError):
    pass


class GridTooCoarseError(SolverError):
    pass


class NoClusterError(LookupError):
    pass


# ---------------------------------------------------------------------------
# radial grids


@dataclass(frozen=True)
class RadialGrid:
    """Sample positions of a radial profile and how to extend them past the ends."""

    topology: Topology
    x_first: float
    h: float
    size: int
    base_length: float

    @property
    def x(self) -> np.ndarray:
        return self.x_first + self.h * np.arange(self.size)

    @classmethod
    def for_metric(cls, metric: ProfileMetric, size: int) -> "RadialGrid":
        h = metric.base_length / size
        if metric.is_torus:
            return cls(metric.topology, metric.x_min, h, size, metric.base_length)
        return cls(metric.topology, 0.5 * h, h, size, metric.base_length)

    def interpolate(self, U: np.ndarray, parity: np.ndarray, x) -> np.ndarray:
        """Four-point Lagrange interpolation of each row of U at points x.

        Sphere-type rows are extended across a pole by u(-x) = parity * u(x).
        Returns an array of shape (rows, len(x)).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        N = self.size
        if self.topology is Topology.TORUS:
            x = np.mod(x - self.x_first, self.base_length) + self.x_first
        s = (x - self.x_first) / self.h
        i0 = np.floor(s).astype(int) - 1
        f = s - (i0 + 1)
        w = np.stack([
            -f * (f - 1) * (f - 2) / 6,
            (f + 1) * (f - 1) * (f - 2) / 2,
            -(f + 1) * f * (f - 2) / 2,
            (f + 1) * f * (f - 1) / 6,
        ])
        out = np.zeros((U.shape[0], x.size), dtype=U.dtype)
        parity = np.asarray(parity, dtype=float)[:, None]
        for m in range(4):
            k = i0 + m
            if self.topology is Topology.TORUS:
                out += w[m] * U[:, k % N]
            else:
                low = k < 0
                high = k >= N
                kk = np.where(low, -k - 1, np.where(high, 2 * N - 1 - k, k))
                sign = np.where(low | high, parity, 1.0)
                out += w[m] * sign * U[:, kk]
        return out


# ---------------------------------------------------------------------------
# modes


@dataclass
class EquivariantMode:
    """One radial eigenfunction u of the n-th separated problem.

    The surface eigenfunction is e^{in theta} u(x); for n != 0 the same u also
    serves e^{-in theta}.  ``u`` is normalized so that 2 pi int u^2 a dx = 1.
    """

    n: int
    j: int
    lam: float
    u: np.ndarray
    grid: RadialGrid
    weight: np.ndarray = field(repr=False)
    norm_check: float = 0.0
    residual: float = 0.0

    @property
    def parity(self) -> float:
        return -1.0 if abs(self.n) % 2 else 1.0

    def radial(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = self.grid.interpolate(self.u[None, :], np.array([self.parity]), x)[0]
        if self.grid.topology is Topology.SPHERE and self.n != 0:
            vals = np.where((x <= 0) | (x >= self.grid.base_length), 0.0, vals)
        elif self.grid.topology is Topology.SPHERE:
            vals = np.where(x <= 0, _pole_value(self.u, 0), vals)
            vals = np.where(x >= self.grid.base_length, _pole_value(self.u, 1), vals)
        return vals


def _pole_value(u, end):
    # even extension u = c0 + c2 x^2 through the two nearest half-offset samples
    u0, u1 = (u[0], u[1]) if end == 0 else (u[-1], u[-2])
    return (9.0 * u0 - u1) / 8.0


def _operator(metric: ProfileMetric, n: int, N: int):
    grid = RadialGrid.for_metric(metric, N)
    x = grid.x
    h = grid.h
    a, _, _ = metric.profile(x)
    a = np.asarray(a, dtype=float) * np.ones_like(x)
    if np.any(a <= 0):
        raise SolverError("profile must be positive at every grid node")
    faces = np.asarray(metric.profile(x + 0.5 * h)[0], dtype=float) * np.ones_like(x)
    if metric.is_torus:
        left = np.roll(faces, 1)
    else:
        left = np.empty_like(faces)
        left[1:] = faces[:-1]
        left[0] = float(np.asarray(metric.profile(np.array([0.0]))[0]).ravel()[0])
        faces = faces.copy()
        faces[-1] = float(np.asarray(metric.profile(np.array([metric.base_length]))[0]).ravel()[0])
        left[0] = max(left[0], 0.0)
        faces[-1] = max(faces[-1], 0.0)
    diag = (left + faces) / (h * h * a) + (n * n) / (a * a)
    off = -faces / (h * h * np.sqrt(a * np.roll(a, -1)))
    return grid, a, diag, off


def _phase_fix(u):
    """Flip sign so u is positive at its first local extremum."""
    scale = np.max(np.abs(u))
    if scale == 0:
        return u
    du = np.diff(u)
    for i in range(1, len(u) - 1):
        if du[i - 1] * du[i] <= 0 and abs(u[i]) > 1e-8 * scale:
            return u if u[i] > 0 else -u
    i = int(np.argmax(np.abs(u)))
    return u if u[i] > 0 else -u


def _count_estimate(metric, n, lam_max, grid):
    a = np.asarray(metric.profile(grid.x)[0]) * np.ones(grid.size)
    k2 = np.maximum(lam_max**2 - n * n / (a * a), 0.0)
    return float(np.sum(np.sqrt(k2)) * grid.h / math.pi)


def _solve_matrix(metric, n, N, lam_max):
    grid, a, diag, off = _operator(metric, n, N)
    # inclusive cutoff: eigenvalues that equal lambda_max exactly must not be
    # lost to round-off in the matrix entries
    top = lam_max * lam_max * (1.0 + CUTOFF_SLACK)
    if not metric.is_torus:
        vals, vecs = sla.eigh_tridiagonal(diag, off[:-1], select="v",
                                          select_range=(-1.0, top))
        return grid, a, vals, vecs, (diag, off)
    if N < 8:
        raise SolverError("torus grid too small")
    idx = np.arange(N)
    nxt = (idx + 1) % N
    B = sp.csr_matrix(
        (np.r_[diag, off, off], (np.r_[idx, idx, nxt], np.r_[idx, nxt, idx])), shape=(N, N)
    )
    k = int(1.2 * _count_estimate(metric, n, lam_max, grid)) + 8
    v0 = np.cos(0.37 * idx) + 1.0  # deterministic start vector
    while True:
        k = min(k, N - 2)
        try:
            vals, vecs = spla.eigsh(B, k=k, sigma=-1.0, which="LM", v0=v0, tol=0.0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"eigensolver did not converge for n={n}, grid={N}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if vals[-1] > top or k >= N - 2:
            break
        k = int(1.5 * k) + 8
    keep = vals <= top
    return grid, a, vals[keep], vecs[:, keep], (diag, off)


def solve_equivariant_modes(metric: ProfileMetric, n: int, grid_size: int = 2048,
                            lambda_max: float = 30.0,
                            accuracy: float | None = None) -> list:
    """All radial eigenpairs of the n-th separated problem with lambda <= lambda_max.

    With ``accuracy`` set, the solve is repeated on a doubled grid and
    ``GridTooCoarseError`` is raised if any eigenvalue moves by more than
    ``accuracy`` relative.
    """
    if grid_size < 128:
        raise ValueError("grid_size must be at least 128")
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    grid, a, vals, vecs, (diag, off) = _solve_matrix(metric, n, grid_size, lambda_max)
    vals = np.maximum(vals, 0.0)
    h = grid.h
    modes = []
    for j in range(vals.size):
        v = vecs[:, j]
        # residual of the symmetric discrete operator
        # on a sphere the wrap coefficient off[-1] multiplies a(0) = 0
        Bv = diag * v + off * np.roll(v, -1) + np.roll(off, 1) * np.roll(v, 1)
        res = float(np.linalg.norm(Bv - vals[j] * v) / max(vals[j], 1.0))
        u = _phase_fix(v / np.sqrt(a * TWO_PI * h))
        norm = TWO_PI * h * float(np.sum(a * u * u))
        modes.append(EquivariantMode(int(n), j, float(math.sqrt(vals[j])), u, grid, a,
                                     abs(norm - 1.0), res))
    if accuracy is not None and modes:
        _, _, fine, _, _ = _solve_matrix(metric, n, 2 * grid_size, lambda_max)
        m = min(fine.size, vals.size)
        lam_c = np.sqrt(vals[:m])
        lam_f = np.sqrt(np.maximum(fine[:m], 0.0))
        drift = np.abs(lam_c - lam_f) / np.maximum(lam_f, 1.0)
        if m and drift.max() > accuracy:
            raise GridTooCoarseError(
                f"grid {grid_size} too coarse for n={n}: eigenvalue drift "
                f"{drift.max():.3g} exceeds {accuracy:g} on doubling"
            )
    return modes


# ---------------------------------------------------------------------------
# tables


def _cluster(lambdas: np.ndarray, tol: float):
    ids = np.zeros(lambdas.size, dtype=int)
    if lambdas.size == 0:
        return ids, np.zeros(0)
    gaps = np.diff(lambdas) > tol * (1.0 + lambdas[1:])
    ids[1:] = np.cumsum(gaps)
    centers = np.array([lambdas[ids == c].mean() for c in range(ids[-1] + 1)])
    return ids, centers


@dataclass
class SpectralTable:
    """Merged spectrum of a surface with pointwise access to the eigenfunctions.

    Entries are sorted by (lambda, |n|, n, j); ``radial_matrix(x)`` returns the
    x-dependent factor of every entry so that phi(x, theta) = R(x) e^{in theta}.
    Eigenvalues within ``cluster_tol * (1 + lambda)`` of their neighbour are
    grouped into one eigenspace.
    """

    label: str
    lambdas: np.ndarray
    ns: np.ndarray
    js: np.ndarray
    lambda_max: float
    n_max: int
    cluster_tol: float
    area: float
    radial_matrix: Callable = field(repr=False)
    quadrature: Callable = field(repr=False)
    weight: Callable = field(repr=False)
    kind: str = "numeric"
    modes: list = field(default_factory=list, repr=False)
    mode_index: np.ndarray | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cluster_ids, self.cluster_lambdas = _cluster(self.lambdas, self.cluster_tol)

    def __len__(self) -> int:
        return int(self.lambdas.size)

    def content_hash(self) -> str:
        """Hash of eigenvalues, indices and sampled radial profiles."""
        h = hashlib.sha256()
        for arr in (self.lambdas, self.ns, self.js):
            h.update(np.ascontiguousarray(arr).tobytes())
        for m in self.modes:
            h.update(np.ascontiguousarray(m.u).tobytes())
        return h.hexdigest()

    @property
    def multiplicities(self) -> np.ndarray:
        return np.bincount(self.cluster_ids, minlength=self.cluster_lambdas.size)

    def values_at(self, x: float, theta: float = 0.0) -> np.ndarray:
        """phi_nu(x, theta) for every entry."""
        r = self.radial_matrix(np.array([float(x)]))[:, 0]
        return r * np.exp(1j * self.ns * theta)

    def density_at(self, x: float) -> np.ndarray:
        """|phi_nu(x, theta)|^2 for every entry (independent of theta)."""
        r = self.radial_matrix(np.array([float(x)]))[:, 0]
        return np.abs(r) ** 2

    def cluster_of(self, lam: float) -> int:
        """Index of the eigenvalue cluster containing lam."""
        if self.cluster_lambdas.size == 0:
            raise NoClusterError("empty table")
        c = int(np.argmin(np.abs(self.cluster_lambdas - lam)))
        members = self.lambdas[self.cluster_ids == c]
        tol = self.cluster_tol * (1.0 + lam)
        if lam < members.min() - tol or lam > members.max() + tol:
            raise NoClusterError(f"no eigenvalue cluster at lambda = {lam!r}")
        return c

    def entry(self, i: int):
        """Mode-like view of entry i (numeric mode or analytic entry)."""
        if self.mode_index is not None:
            return _SignedMode(self.modes[self.mode_index[i]], int(self.ns[i]))
        return AnalyticEntry(int(self.ns[i]), int(self.js[i]), float(self.lambdas[i]),
                             lambda x, i=i: self.radial_matrix(np.atleast_1d(x))[i],
                             self.weight)


@dataclass
class _SignedMode:
    mode: EquivariantMode
    n: int

    @property
    def lam(self) -> float:
        return self.mode.lam

    def radial(self, x):
        return self.mode.radial(x)


@dataclass
class AnalyticEntry:
    n: int
    j: int
    lam: float
    radial_fn: Callable = field(repr=False)
    weight_fn: Callable = field(repr=False)

    def radial(self, x):
        return self.radial_fn(x)


def _table_order(lams, ns, js):
    return np.lexsort((js, ns, np.abs(ns), lams))


def assemble_spectral_table(metric: ProfileMetric, lambda_max: float, grid_size: int = 2048,
                            cluster_tol: float = DEFAULT_CLUSTER_TOL,
                            accuracy: float | None = None) -> SpectralTable:
    """Solve every separated problem with |n| <= lambda_max * max(a) and merge."""
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    max_a = metric.max_a()
    n_max = int(math.ceil(lambda_max * max_a))
    modes = []
    for n in range(n_max + 1):
        found = solve_equivariant_modes(metric, n, grid_size, lambda_max, accuracy)
        if not found and n > 0:
            # lambda^2 >= n^2 / max(a)^2 keeps every higher n empty as well
            break
        modes.extend(found)
    for m in modes:
        if m.n > 0 and m.lam < m.n / max_a * (1 - 1e-9):
            log.warning("mode n=%d j=%d violates the n-cutoff bound (lambda=%g)", m.n, m.j, m.lam)
    return _table_from_modes(metric, modes, lambda_max, grid_size, cluster_tol, accuracy)


def _table_from_modes(metric, modes, lambda_max, grid_size, cluster_tol, accuracy):
    n_max = int(math.ceil(lambda_max * metric.max_a()))
    lams, ns, js, idx = [], [], [], []
    for k, m in enumerate(modes):
        for sgn in ((1,) if m.n == 0 else (1, -1)):
            lams.append(m.lam)
            ns.append(sgn * m.n)
            js.append(m.j)
            idx.append(k)
    lams = np.asarray(lams, dtype=float)
    ns, js, idx = (np.asarray(v, dtype=int) for v in (ns, js, idx))
    order = _table_order(lams, ns, js)
    lams, ns, js, idx = lams[order], ns[order], js[order], idx[order]

    grid = RadialGrid.for_metric(metric, grid_size)
    U = np.array([m.u for m in modes]) if modes else np.zeros((0, grid_size))
    parity = np.array([m.parity for m in modes])
    mode_n = np.array([m.n for m in modes], dtype=int)
    a_nodes = _node_weights(metric, grid)
    area = TWO_PI * grid.h * float(np.sum(a_nodes))

    def radial_matrix(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = grid.interpolate(U, parity, x)
        if not metric.is_torus:
            for col in np.flatnonzero((x <= 0) | (x >= metric.base_length)):
                u0, u1 = (U[:, 0], U[:, 1]) if x[col] <= 0 else (U[:, -1], U[:, -2])
                vals[:, col] = np.where(mode_n == 0, (9.0 * u0 - u1) / 8.0, 0.0)
        return vals[idx]

    def quadrature():
        return grid.x, TWO_PI * grid.h * a_nodes

    def weight(x):
        return np.asarray(metric.profile(np.atleast_1d(x))[0])

    params = {"grid_size": grid_size, "lambda_max": lambda_max, "cluster_tol": cluster_tol,
              "accuracy": accuracy, "metric": metric.describe()}
    return SpectralTable(metric.label, lams, ns, js, float(lambda_max), n_max, cluster_tol,
                         area, radial_matrix, quadrature, weight, "numeric", modes, idx, params)


def _node_weights(metric, grid):
    return np.asarray(metric.profile(grid.x)[0], dtype=float) * np.ones(grid.size)


# ---------------------------------------------------------------------------
# cache

CACHE_VERSION = 1


def table_cache_key(metric: ProfileMetric, lambda_max: float, grid_size: int,
                    accuracy: float | None = None) -> str:
    """Content hash of the metric (including its sampled profile) and solver inputs."""
    grid = RadialGrid.for_metric(metric, grid_size)
    samples = np.stack([np.asarray(v, dtype=float) * np.ones(grid.size)
                        for v in metric.profile(grid.x)])
    h = hashlib.sha256()
    h.update(json.dumps({
        "version": CACHE_VERSION,
        "metric": metric.describe(),
        "lambda_max": repr(float(lambda_max)),
        "grid_size": int(grid_size),
        "accuracy": None if accuracy is None else repr(float(accuracy)),
    }, sort_keys=True).encode())
    h.update(np.ascontiguousarray(samples).tobytes())
    return h.hexdigest()[:24]


def save_table(table: SpectralTable, directory) -> Path:
    """Write a numeric table as header.json plus one modes_n<k>.csv per n."""
    if table.kind != "numeric":
        raise ValueError("only numeric tables are cached")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_n: dict = {}
    for m in table.modes:
        by_n.setdefault(m.n, []).append(m)
    files = []
    for n in sorted(by_n):
        name = f"modes_n{n}.csv"
        rows = by_n[n]
        data = np.column_stack([
            np.full(len(rows), n), [m.j for m in rows], [m.lam for m in rows],
            np.array([m.u for m in rows]),
        ])
        header = "n,j,lambda," + ",".join(f"u{i}" for i in range(rows[0].u.size))
        fmt = ["%d", "%d"] + ["%.17g"] * (data.shape[1] - 2)
        np.savetxt(directory / name, data, fmt=fmt, delimiter=",", header=header, comments="")
        files.append(name)
    header = {
        "version": CACHE_VERSION,
        "label": table.label,
        "params": table.params,
        "files": files,
        "checks": [[m.n, m.j, m.norm_check, m.residual] for m in table.modes],
        "content_hash": table.content_hash(),
    }
    (directory / "header.json").write_text(json.dumps(header, indent=1, sort_keys=True))
    return directory


def load_table(metric: ProfileMetric, directory, cluster_tol: float | None = None) -> SpectralTable:
    directory = Path(directory)
    header = json.loads((directory / "header.json").read_text())
    if header.get("version") != CACHE_VERSION:
        raise ValueError(f"cache version mismatch in {directory}")
    params = header["params"]
    grid = RadialGrid.for_metric(metric, int(params["grid_size"]))
    a_nodes = _node_weights(metric, grid)
    checks = {(n, j): (nc, res) for n, j, nc, res in header["checks"]}
    modes = []
    for name in header["files"]:
        data = np.loadtxt(directory / name, delimiter=",", skiprows=1, ndmin=2)
        for row in data:
            n, j = int(row[0]), int(row[1])
            nc, res = checks[(n, j)]
            modes.append(EquivariantMode(n, j, float(row[2]), row[3:].copy(), grid, a_nodes,
                                         nc, res))
    tol = params["cluster_tol"] if cluster_tol is None else cluster_tol
    table = _table_from_modes(metric, modes, params["lambda_max"], params["grid_size"], tol,
                              params["accuracy"])
    if table.content_hash() != header["content_hash"]:
        raise ValueError(f"cached table in {directory} fails its content hash")
    return table


def cached_spectral_table(metric: ProfileMetric, lambda_max: float, grid_size: int = 2048,
                          cluster_tol: float = DEFAULT_CLUSTER_TOL,
                          accuracy: float | None = None, cache_dir=None,
                          refresh: bool = False) -> SpectralTable:
    """``assemble_spectral_table`` behind an on-disk cache guarded by a file lock."""
    if cache_dir is None:
        return assemble_spectral_table(metric, lambda_max, grid_size, cluster_tol, accuracy)
    key = table_cache_key(metric, lambda_max, grid_size, accuracy)
    entry = Path(cache_dir) / key
    entry.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(entry) + ".lock"):
        if not refresh and (entry / "header.json").exists():
            try:
                return load_table(metric, entry, cluster_tol)
            except (ValueError, OSError, KeyError) as exc:
                log.warning("discarding unusable cache entry %s: %s", entry, exc)
        table = assemble_spectral_table(metric, lambda_max, grid_size, cluster_tol, accuracy)
        if entry.exists():
            shutil.rmtree(entry)
        save_table(table, entry)
        return table


# ---------------------------------------------------------------------------
# closed forms


def normalized_legendre(lmax: int, t: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre values, shape (lmax+1, lmax+1, len(t)).

    ``P[l, m](t)`` equals sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(t) without the
    Condon-Shortley sign, so |Y_l^m(x, theta)| = |P[l, |m|](cos x)| on the unit
    sphere.  Built by the standard three-term recurrence in l.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.sqrt(np.maximum(0.0, 1.0 - t * t))
    P = np.zeros((lmax + 1, lmax + 1, t.size))
    P[0, 0] = math.sqrt(1.0 / (4.0 * math.pi))
    for m in range(1, lmax + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * t * P[m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            c = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            c_prev = math.sqrt((4 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - m * m))
            P[l, m] = c * (t * P[l - 1, m] - P[l - 2, m] / c_prev)
    return P


def analytic_spectrum(kind, lambda_max: float, cluster_tol: float = 1e-12) -> SpectralTable:
    """Exact spectrum of a flat torus or round sphere, no discretization."""
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    if isinstance(kind, FlatTorus):
        c, L = float(kind.c), float(kind.base_length)
        metric = build_profile_metric(kind)
        kk = 2 * math.pi / L
        kmax = int(math.floor(lambda_max / kk))
        nmax = int(math.floor(lambda_max * c))
        K, Nn = np.meshgrid(np.arange(-kmax, kmax + 1), np.arange(-nmax, nmax + 1), indexing="ij")
        lam2 = (kk * K) ** 2 + (Nn / c) ** 2
        keep = lam2 <= lambda_max**2 * (1 + 1e-14)
        ks, ns, lams = K[keep], Nn[keep], np.sqrt(lam2[keep])
        # j orders the x-frequencies of one n by (|k|, k)
        js = np.array([2 * abs(k) - (1 if k > 0 else 0) for k in ks])
        order = _table_order(lams, ns, js)
        ks, ns, js, lams = ks[order], ns[order], js[order], lams[order]
        area = TWO_PI * c * L

        def radial_matrix(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return np.exp(1j * kk * np.outer(ks, x)) / math.sqrt(area)

        def quadrature(nodes=256):
            x = np.arange(nodes) * (L / nodes)
            return x, np.full(nodes, TWO_PI * c * L / nodes)

        def weight(x):
            return np.full(np.shape(np.atleast_1d(x)), c)

        return SpectralTable(metric.label, lams, ns.astype(int), js.astype(int),
                             float(lambda_max), nmax, cluster_tol, area, radial_matrix,
                             quadrature, weight, "analytic",
                             params={"kind": "flat-torus", "c": c, "L": L})
    if isinstance(kind, RoundSphere):
        R = float(kind.radius)
        metric = build_profile_metric(kind)
        lmax = 0
        while (lmax + 1) * (lmax + 2) / R**2 <= lambda_max**2 * (1 + 1e-14):
            lmax += 1
        ls, ms = [], []
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                ls.append(l)
                ms.append(m)
        ls, ms = np.array(ls), np.array(ms)
        lams = np.sqrt(ls * (ls + 1.0)) / R
        js = ls - np.abs(ms)
        order = _table_order(lams, ms, js)
        ls, ms, js, lams = ls[order], ms[order], js[order], lams[order]
        area = 4 * math.pi * R * R

        def radial_matrix(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            P = normalized_legendre(lmax, np.cos(x / R))
            return P[ls, np.abs(ms)] / R

        def quadrature(nodes=None):
            nodes = nodes or (2 * lmax + 8)
            t, w = np.polynomial.legendre.leggauss(nodes)
            return R * np.arccos(t), TWO_PI * R * R * w

        def weight(x):
            return R * np.sin(np.atleast_1d(x) / R)

        return SpectralTable(metric.label, lams, ms.astype(int), js.astype(int),
                             float(lambda_max), lmax, cluster_tol, area, radial_matrix,
                             quadrature, weight, "analytic",
                             params={"kind": "round-sphere", "R": R})
    raise TypeError(f"no closed form for {kind!r}")


# ---------------------------------------------------------------------------
# statistics


def lp_exponent(p: float, dim: int = 2) -> float:
    """Universal L^p growth exponent delta(p) of L^2-normalized eigenfunctions."""
    crit = 2.0 * (dim + 1) / (dim - 1)
    inv = 0.0 if math.isinf(p) else 1.0 / p
    if p >= crit:
        return dim * (0.5 - inv) - 0.5
    return (dim - 1) / 2.0 * (0.5 - inv)


@dataclass
class ModeStatistics:
    sup_norm: float
    argmax: float
    lp_norms: dict
    coarse: bool

    def value_at(self, mode, x: float, theta: float = 0.0) -> complex:
        return complex(mode.radial(np.array([x]))[0] * np.exp(1j * mode.n * theta))


def mode_statistics(mode, eval_grid, weight=None, ps=(2, 4, 6)) -> ModeStatistics:
    """Sup norm and L^p norms of e^{in theta} R(x) sampled on ``eval_grid``.

    ``eval_grid`` is an increasing array of base coordinates covering the base
    uniformly; the area element is 2 pi a(x) dx.  ``weight`` defaults to the
    mode's own profile samples when it carries them.
    """
    xs = np.asarray(eval_grid, dtype=float)
    vals = np.abs(mode.radial(xs))
    if weight is None:
        weight = _mode_weight(mode)
    a = np.asarray(weight(xs), dtype=float) * np.ones_like(xs)
    dx = np.gradient(xs) if xs.size > 1 else np.ones(1)
    spacing = float(np.max(np.diff(xs))) if xs.size > 1 else math.inf
    coarse = mode.lam > 0 and spacing > (TWO_PI / mode.lam) / 10.0
    if coarse:
        log.warning("evaluation grid spacing %.3g is coarser than a tenth of the wavelength "
                    "of lambda=%.4g", spacing, mode.lam)
    norms = {}
    for p in ps:
        norms[p] = float((TWO_PI * np.sum(vals**p * a * dx)) ** (1.0 / p))
    i = int(np.argmax(vals))
    return ModeStatistics(float(vals[i]), float(xs[i]), norms, bool(coarse))


def _mode_weight(mode):
    if isinstance(mode, _SignedMode):
        mode = mode.mode
    if isinstance(mode, EquivariantMode):
        g = mode.grid
        w = mode.weight

        def interp(x):
            return g.interpolate(w[None, :], np.array([1.0]), x)[0]
        return interp
    if isinstance(mode, AnalyticEntry):
        return mode.weight_fn
    raise TypeError("pass weight= for this mode type")
