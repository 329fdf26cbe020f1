"""Geodesic flow, geodesic loops and loopsets on surfaces of revolution.

Directions at a base point are measured by the angle psi of the unit
covector from the meridian: xi_x = cos(psi), xi_theta = a(x0) sin(psi).
The Clairaut integral of a geodesic is its xi_theta.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import ProfileMetric
from .kernels import flow as _flow

__all__ = [
    "PhasePoint",
    "FlowError",
    "LoopRecord",
    "LoopComponent",
    "LoopsetReport",
    "JacobiResult",
    "flow_geodesic",
    "clairaut_integral",
    "hamiltonian",
    "loop_length",
    "loopset_scan",
    "jacobi_transfer",
    "NO_LOOP",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
NO_LOOP = math.inf

DEFAULT_FLOW_TOL = 1e-10
DEFAULT_LOOP_TOL = 1e-4
DEFAULT_CLUSTER_TOL = 1e-3
DEFAULT_RESOLUTION_FLOOR = TWO_PI / 2**20
SMOOTH_CLOSE_TOL = 1e-3
# below this |xi_theta| a sphere-type geodesic is treated as a meridian
MERIDIAN_EPS = 1e-14


class FlowError(RuntimeError):
    """Adaptive integration failed; ``t_reached`` is the last accepted time."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t = {t_reached:.6g})")
        self.t_reached = t_reached


@dataclass(frozen=True)
class PhasePoint:
    x: float
    theta: float
    xi_x: float
    xi_theta: float

    @classmethod
    def from_direction(cls, metric: ProfileMetric, x: float, theta: float, psi: float):
        """Unit covector at (x, theta) making angle psi with the meridian.

        At a pole every direction is a meridian; psi then selects the meridian
        theta + psi and the covector points into the surface.
        """
        a0 = float(metric.a(np.array([x]))[0])
        if not metric.is_torus and abs(a0) <= MERIDIAN_EPS:
            inward = 1.0 if x < 0.5 * metric.base_length else -1.0
            return cls(float(x), float(theta) + psi, inward, 0.0)
        return cls(float(x), float(theta), math.cos(psi), a0 * math.sin(psi))

    def direction_angle(self, metric: ProfileMetric) -> float:
        a = float(metric.a(np.array([self.x]))[0])
        return math.atan2(self.xi_theta / a, self.xi_x) % TWO_PI

    def as_tuple(self) -> tuple:
        return (self.x, self.theta, self.xi_x, self.xi_theta)


def hamiltonian(metric: ProfileMetric, point: PhasePoint) -> float:
    """p(x, xi) = sqrt(xi_x^2 + xi_theta^2 / a(x)^2)."""
    if point.xi_theta == 0.0:
        # meridians, including points at a pole where a = 0
        return abs(point.xi_x)
    a = float(metric.a(np.array([point.x]))[0])
    return math.hypot(point.xi_x, point.xi_theta / a)


def clairaut_integral(metric: ProfileMetric, point: PhasePoint) -> float:
    """Pairing of the covector with the rotation field d/dtheta."""
    return point.xi_theta


def _meridian_flow(metric: ProfileMetric, start: PhasePoint, t: float) -> PhasePoint:
    # unfold the meridian great circle: each pole passage flips direction and
    # moves theta to the opposite half-meridian
    L = metric.base_length
    sigma = 1.0 if start.xi_x >= 0 else -1.0
    u = start.x + sigma * abs(start.xi_x) * t
    m = math.floor(u / L)
    if m % 2 == 0:
        x = u - m * L
        xi = sigma * abs(start.xi_x)
    else:
        x = (m + 1) * L - u
        xi = -sigma * abs(start.xi_x)
    return PhasePoint(x, start.theta + math.pi * abs(m), xi, 0.0)


def _is_meridian(metric: ProfileMetric, point: PhasePoint) -> bool:
    return not metric.is_torus and abs(point.xi_theta) <= MERIDIAN_EPS


def _flow_forward(metric, start: PhasePoint, t: float, tolerance: float) -> PhasePoint:
    if t == 0.0:
        return start
    if _is_meridian(metric, start):
        return _meridian_flow(metric, start, t)
    status, out = _flow.scan_lanes(metric, start.x, start.theta, start.xi_x,
                                   start.xi_theta, t, tolerance)
    if status[0] == _flow.STATUS_UNDERFLOW:
        raise FlowError("step-size underflow in geodesic flow", float(out[0, 0]))
    _, x, th, px, pt = out[0]
    return PhasePoint(float(x), float(th), float(px), float(pt))


def _flip(p: PhasePoint) -> PhasePoint:
    return PhasePoint(p.x, p.theta, -p.xi_x, -p.xi_theta)


def flow_geodesic(metric: ProfileMetric, start: PhasePoint, t: float,
                  tolerance: float = DEFAULT_FLOW_TOL, samples: int | None = None):
    """Apply the Hamiltonian flow of p for time t (t may be negative).

    Coordinates are left unwrapped (theta accumulates; torus x is not reduced).
    With ``samples=k`` also returns ``(times, points)`` on a uniform grid of
    k + 1 times from 0 to t.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    reverse = t < 0
    current = _flip(start) if reverse else start
    if samples is None:
        end = _flow_forward(metric, current, abs(t), tolerance)
        return _flip(end) if reverse else end
    times = np.linspace(0.0, t, int(samples) + 1)
    points = [start]
    dt = abs(t) / int(samples)
    for _ in range(int(samples)):
        current = _flow_forward(metric, current, dt, tolerance)
        points.append(_flip(current) if reverse else current)
    return points[-1], (times, points)


# ---------------------------------------------------------------------------
# loops


@dataclass(frozen=True)
class LoopRecord:
    psi: float
    return_time: float
    return_angle: float
    clairaut: float
    smooth_closed: bool


@dataclass(frozen=True)
class LoopComponent:
    """A run of adjacent loop directions sharing one return time."""

    psi_left: float
    psi_right: float
    extent: float
    return_time: float
    time_spread: float
    members: int
    isolated: bool


@dataclass
class LoopsetReport:
    base_point: tuple
    horizon: float
    samples: int
    loops: list
    components: list
    measure_estimate: float
    lsp: list
    parameters: dict = field(default_factory=dict)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["psi", "return_time", "return_angle", "clairaut", "smooth_closed"])
            for r in sorted(self.loops, key=lambda r: r.psi):
                w.writerow([repr(r.psi), repr(r.return_time), repr(r.return_angle),
                            repr(r.clairaut), int(r.smooth_closed)])
        return path

    def summary(self) -> dict:
        return {
            "base_point": list(self.base_point),
            "horizon": self.horizon,
            "samples": self.samples,
            "measure_estimate": self.measure_estimate,
            "lsp": list(self.lsp),
            "components": [asdict(c) for c in self.components],
            "parameters": dict(self.parameters),
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return path


def _direction_lanes(metric, base, psis):
    x0, th0 = base
    a0 = float(metric.a(np.array([x0]))[0])
    psis = np.asarray(psis, dtype=float)
    return (np.full(psis.shape, float(x0)), np.full(psis.shape, float(th0)),
            np.cos(psis), a0 * np.sin(psis), a0)


def _trace_loops(metric, base, psis, T_max, loop_tol, tolerance):
    """First-return data for each direction: times (inf if none) and return states."""
    xs, ths, pxs, pts, a0 = _direction_lanes(metric, base, psis)
    m = xs.shape[0]
    times = np.full(m, NO_LOOP)
    states = np.zeros((m, 4))
    if m == 0:
        return times, states
    meridian = np.zeros(m, dtype=bool)
    if not metric.is_torus:
        meridian = np.abs(pts) <= MERIDIAN_EPS
        if meridian.any():
            # meridians first return after the full great circle through both poles
            period = 2.0 * metric.base_length
            if period <= T_max:
                times[meridian] = period
                states[meridian] = np.column_stack(
                    [xs[meridian], ths[meridian] + TWO_PI, pxs[meridian], pts[meridian]])
    lanes = np.flatnonzero(~meridian)
    if lanes.size:
        status, out = _flow.scan_lanes(metric, xs[lanes], ths[lanes], pxs[lanes],
                                       pts[lanes], T_max, tolerance, detect=True,
                                       base=base, loop_tol=loop_tol)
        if np.any(status == _flow.STATUS_UNDERFLOW):
            bad = lanes[status == _flow.STATUS_UNDERFLOW][0]
            raise FlowError(f"step-size underflow for direction psi={psis[bad]:.9g}",
                            float(out[status == _flow.STATUS_UNDERFLOW][0, 0]))
        hit = status == _flow.STATUS_LOOP
        times[lanes[hit]] = out[hit, 0]
        states[lanes[hit]] = out[hit, 1:]
    return times, states


def _record(metric, psi, t, state) -> LoopRecord:
    x, th, px, pt = state
    a = float(metric.a(np.array([x]))[0])
    ret = math.atan2(pt / a, px) % TWO_PI
    diff = abs((ret - psi + math.pi) % TWO_PI - math.pi)
    return LoopRecord(float(psi % TWO_PI), float(t), float(ret), float(pt),
                      bool(diff < SMOOTH_CLOSE_TOL))


def loop_length(metric: ProfileMetric, base, psi: float, T_max: float,
                loop_tol: float = DEFAULT_LOOP_TOL,
                tolerance: float = DEFAULT_FLOW_TOL) -> float:
    """First time in (0, T_max] the geodesic in direction psi returns to base.

    Returns ``NO_LOOP`` (+inf) when no return within ``loop_tol`` occurs.
    """
    if not (T_max > 0 and loop_tol > 0):
        raise ValueError("T_max and loop_tol must be positive")
    times, _ = _trace_loops(metric, base, np.array([psi]), T_max, loop_tol, tolerance)
    return float(times[0])


def _components(times, cluster_tol):
    """Group a circular sequence of return times into runs of near-equal times.

    Returns a list of ``[start, length]`` runs over the circular index space.
    """
    n = len(times)
    loops = np.isfinite(times)
    runs = []
    i = 0
    while i < n:
        if not loops[i]:
            i += 1
            continue
        lo = hi = times[i]
        j = i + 1
        while j < n and loops[j] and max(hi, times[j]) - min(lo, times[j]) <= cluster_tol:
            lo, hi = min(lo, times[j]), max(hi, times[j])
            j += 1
        runs.append([i, j - i])
        i = j
    if len(runs) >= 2 and runs[0][0] == 0:
        last = runs[-1]
        if last[0] + last[1] == n:
            merged = np.concatenate([times[last[0]:], times[: runs[0][1]]])
            if merged.max() - merged.min() <= cluster_tol:
                runs[0] = [last[0], last[1] + runs[0][1]]
                runs.pop()
    return runs


def loopset_scan(metric: ProfileMetric, base, T_max: float, n_directions: int = 4096,
                 loop_tol: float = DEFAULT_LOOP_TOL,
                 cluster_tol: float = DEFAULT_CLUSTER_TOL,
                 tolerance: float = DEFAULT_FLOW_TOL,
                 resolution_floor: float = DEFAULT_RESOLUTION_FLOOR,
                 pole_analytic: bool = False) -> LoopsetReport:
    """Scan loop directions at ``base`` and estimate the loopset measure.

    Directions are scanned on a uniform grid of ``n_directions`` angles.  Each
    run of adjacent looping directions with a common return time is a
    component; its edges are refined by bisection down to ``resolution_floor``
    and the component's measure is the refined angular extent.  A lone grid
    direction whose neighbours never loop at any refinement level is isolated
    and contributes no measure.
    """
    if n_directions < 64:
        raise ValueError("n_directions must be at least 64")
    if not (T_max > 0 and loop_tol > 0 and cluster_tol > 0):
        raise ValueError("T_max, loop_tol and cluster_tol must be positive")
    x0, th0 = float(base[0]), float(base[1])
    params = {
        "metric": metric.label, "T_max": T_max, "n_directions": n_directions,
        "loop_tol": loop_tol, "cluster_tol": cluster_tol, "tolerance": tolerance,
        "resolution_floor": resolution_floor,
    }
    if not metric.is_torus and min(x0, metric.base_length - x0) <= 0.0:
        if not pole_analytic:
            raise ValueError("base point is a pole; pass pole_analytic=True for the "
                             "closed-form answer")
        period = 2.0 * metric.base_length
        if period > T_max:
            return LoopsetReport((x0, th0), T_max, 0, [], [], 0.0, [], params)
        comp = LoopComponent(0.0, TWO_PI, TWO_PI, period, 0.0, 0, False)
        return LoopsetReport((x0, th0), T_max, 0, [], [comp], TWO_PI, [period], params)

    n = int(n_directions)
    dpsi = TWO_PI / n
    psis = np.arange(n) * dpsi
    times, states = _trace_loops(metric, (x0, th0), psis, T_max, loop_tol, tolerance)
    loops = [_record(metric, psis[i], times[i], states[i]) for i in np.flatnonzero(np.isfinite(times))]
    runs = _components(times, cluster_tol)

    full = len(runs) == 1 and runs[0][1] == n
    components = []
    if full:
        t = times
        components.append(LoopComponent(0.0, TWO_PI, TWO_PI, float(np.mean(t)),
                                        float(t.max() - t.min()), n, False))
    else:
        # each run gets a left and right bracket [member, outsider]; all brackets
        # are bisected together so each level is one batch of lanes
        idx = [np.arange(s, s + k) % n for s, k in runs]
        tmin = np.array([times[i].min() for i in idx])
        tmax = np.array([times[i].max() for i in idx])
        member = np.empty(2 * len(runs))
        outside = np.empty(2 * len(runs))
        moved = np.zeros(2 * len(runs), dtype=bool)
        for c, (s, k) in enumerate(runs):
            member[2 * c] = s * dpsi
            outside[2 * c] = (s - 1) * dpsi
            member[2 * c + 1] = (s + k - 1) * dpsi
            outside[2 * c + 1] = (s + k) * dpsi
        owner = np.repeat(np.arange(len(runs)), 2)
        while len(runs) and np.max(np.abs(outside - member)) > resolution_floor:
            mid = 0.5 * (member + outside)
            mt, ms = _trace_loops(metric, (x0, th0), mid % TWO_PI, T_max, loop_tol, tolerance)
            for b in range(mid.size):
                c = owner[b]
                t = mt[b]
                if np.isfinite(t):
                    loops.append(_record(metric, mid[b], t, ms[b]))
                joins = (np.isfinite(t) and max(tmax[c], t) - min(tmin[c], t) <= cluster_tol)
                if joins:
                    member[b] = mid[b]
                    moved[b] = True
                    tmin[c], tmax[c] = min(tmin[c], t), max(tmax[c], t)
                else:
                    outside[b] = mid[b]
        floor_hits = 0
        for c, (s, k) in enumerate(runs):
            left = 0.5 * (member[2 * c] + outside[2 * c])
            right = 0.5 * (member[2 * c + 1] + outside[2 * c + 1])
            isolated = k == 1 and not (moved[2 * c] or moved[2 * c + 1])
            extent = 0.0 if isolated else max(0.0, right - left)
            floor_hits += isolated
            t_mean = float(np.mean(times[idx[c]]))
            components.append(LoopComponent(
                float(left % TWO_PI), float(right % TWO_PI), float(extent), t_mean,
                float(tmax[c] - tmin[c]), int(k), bool(isolated)))
        if floor_hits:
            log.warning("%d loop directions stayed isolated at the resolution floor %.3g",
                        floor_hits, resolution_floor)

    measure = float(min(TWO_PI, sum(c.extent for c in components)))
    lsp = []
    for t in sorted(c.return_time for c in components):
        if not lsp or t - lsp[-1] > cluster_tol:
            lsp.append(t)
    loops.sort(key=lambda r: r.psi)
    return LoopsetReport((x0, th0), float(T_max), n, loops, components, measure, lsp, params)


# ---------------------------------------------------------------------------
# Jacobi fields


@dataclass
class JacobiResult:
    """Transfer matrix [[Y_a, Y_b], [Y_a', Y_b']] at time t and conjugate times.

    Y_a starts with (Y, Y') = (1, 0), Y_b with (0, 1); conjugate times are the
    zeros of Y_b in (0, t].
    """

    t: float
    transfer: np.ndarray
    conjugate_times: list


def jacobi_transfer(metric: ProfileMetric, base, psi: float, t: float,
                    tolerance: float = 1e-12) -> JacobiResult:
    """Integrate normal Jacobi fields Y'' + K(gamma(s)) Y = 0 along a geodesic."""
    if not t > 0:
        raise ValueError("t must be positive")
    start = PhasePoint.from_direction(metric, base[0], base[1], psi)
    L = metric.base_length
    I = start.xi_theta

    if _is_meridian(metric, start):
        sigma = 1.0 if start.xi_x >= 0 else -1.0

        def fun(s, y):
            r = (start.x + sigma * s) % (2 * L)
            x = r if r <= L else 2 * L - r
            # -a''/a has a finite limit at the poles; sample just inside
            x = min(max(x, 1e-9), L - 1e-9)
            a, _, a2 = metric.profile(np.array([x]))
            k = -float(a2[0]) / float(a[0])
            return [y[1], -k * y[0], y[3], -k * y[2]]

        y0 = [1.0, 0.0, 0.0, 1.0]
        ya, yb = slice(0, 2), slice(2, 4)
    else:
        def fun(s, y):
            x, px = y[0], y[1]
            a, a1, a2 = (float(v[0]) for v in metric.profile(np.array([x])))
            p = math.sqrt(px * px + I * I / (a * a))
            k = -a2 / a
            return [px / p, I * I * a1 / (a**3 * p), y[3], -k * y[2], y[5], -k * y[4]]

        y0 = [start.x, start.xi_x, 1.0, 0.0, 0.0, 1.0]
        ya, yb = slice(2, 4), slice(4, 6)

    def event(s, y):
        return y[yb][0]

    sol = solve_ivp(fun, (0.0, t), y0, method="DOP853", rtol=tolerance, atol=tolerance,
                    events=event)
    if sol.status < 0:
        raise FlowError(f"Jacobi integration failed: {sol.message}", float(sol.t[-1]))
    end = sol.y[:, -1]
    transfer = np.array([[end[ya][0], end[yb][0]], [end[ya][1], end[yb][1]]])
    conj = [float(s) for s in sol.t_events[0] if s > 1e-8 * max(1.0, t)]
    return JacobiResult(float(t), transfer, conj)
