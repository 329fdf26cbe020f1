"""Profile metrics g = dx^2 + a(x)^2 dtheta^2 for surfaces of revolution."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .kernels import profiles as _prof

__all__ = [
    "Topology",
    "BandProfile",
    "ProfileMetric",
    "BridgeSpec",
    "FlatTorus",
    "RoundSphere",
    "FourierTorus",
    "CustomProfile",
    "ProfileDiagnostics",
    "MetricError",
    "build_profile_metric",
    "build_bridge_metric",
    "profile_diagnostics",
]

TWO_PI = 2.0 * math.pi


class MetricError(ValueError):
    """A metric description violates the profile invariants."""


class Topology(str, enum.Enum):
    SPHERE = "sphere"
    TORUS = "torus"


class BandProfile(str, enum.Enum):
    ROUND_COS = "round-cos"
    PAPER_SQRT = "paper-sqrt"


ProfileFn = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class ProfileMetric:
    """A rotationally symmetric metric on a sphere or torus.

    ``profile(x)`` returns ``(a, a', a'')`` for an array of base coordinates.
    Torus-type metrics live on ``[x_min, x_min + base_length)`` with periodic
    wrap; sphere-type metrics on ``[0, base_length]`` with poles at both ends.
    Coded profiles (``code >= 0``) can be evaluated inside compiled kernels.
    """

    topology: Topology
    base_length: float
    profile: ProfileFn = field(compare=False, repr=False)
    label: str
    code: int = _prof.PROF_PYTHON
    params: tuple = ()
    x_min: float = 0.0

    @property
    def params_array(self) -> np.ndarray:
        return np.asarray(self.params, dtype=np.float64)

    @property
    def is_coded(self) -> bool:
        return self.code >= 0

    @property
    def is_torus(self) -> bool:
        return self.topology is Topology.TORUS

    def a(self, x) -> np.ndarray:
        return self.profile(np.asarray(x, dtype=float))[0]

    def curvature(self, x) -> np.ndarray:
        """Gauss curvature -a''/a."""
        a, _, a2 = self.profile(np.asarray(x, dtype=float))
        return -a2 / a

    def wrap(self, x):
        """Reduce a torus coordinate into ``[x_min, x_min + base_length)``."""
        if not self.is_torus:
            return x
        return np.mod(np.asarray(x) - self.x_min, self.base_length) + self.x_min

    def area(self, n: int = 8192) -> float:
        """Surface area 2*pi*int a dx (composite midpoint rule)."""
        h = self.base_length / n
        x = self.x_min + (np.arange(n) + 0.5) * h
        return float(TWO_PI * h * self.a(x).sum())

    def max_a(self, n: int = 8192) -> float:
        x = self.x_min + np.linspace(0.0, self.base_length, n + 1)
        return float(self.a(x).max())

    def describe(self) -> dict:
        """JSON-ready description; used for cache keys."""
        return {
            "label": self.label,
            "topology": self.topology.value,
            "base_length": repr(float(self.base_length)),
            "code": int(self.code),
            "params": [repr(float(p)) for p in self.params],
            "x_min": repr(float(self.x_min)),
        }


@dataclass(frozen=True)
class FlatTorus:
    c: float = 1.0
    base_length: float = TWO_PI


@dataclass(frozen=True)
class RoundSphere:
    radius: float = 1.0


@dataclass(frozen=True)
class FourierTorus:
    """a(x) = mean + sum_m amplitudes[m-1] cos(m k x + phases[m-1]), k = 2 pi / L."""

    mean: float
    amplitudes: Sequence[float]
    phases: Sequence[float]
    base_length: float = TWO_PI


@dataclass(frozen=True)
class CustomProfile:
    profile: ProfileFn
    topology: Topology
    base_length: float
    label: str = "custom"
    x_min: float = 0.0


@dataclass(frozen=True)
class BridgeSpec:
    """Torus with a round equatorial band joined to a flat part by smooth bridges.

    The base circle is centred at the band equator x = 0 and has length
    ``2*(band_half_width + bridge_width) + flat_length``.
    """

    band_half_width: float = 0.25
    bridge_width: float = 0.25
    flat_length: float = TWO_PI + 1.0
    band_profile: BandProfile = BandProfile.ROUND_COS

    @property
    def base_length(self) -> float:
        return 2.0 * (self.band_half_width + self.bridge_width) + self.flat_length

    def band_edge_value(self) -> float:
        eps = self.band_half_width
        if BandProfile(self.band_profile) is BandProfile.ROUND_COS:
            return math.cos(eps)
        return math.sqrt(1.0 - eps * eps)

    @property
    def flat_value(self) -> float:
        return 0.5 * self.band_edge_value()


def _coded(topology, base_length, label, code, params, x_min=0.0) -> ProfileMetric:
    params = tuple(float(p) for p in params)
    fn = partial(_prof.profile_array, code, np.asarray(params, dtype=np.float64))
    return ProfileMetric(topology, float(base_length), fn, label, code, params, float(x_min))


def build_profile_metric(kind) -> ProfileMetric:
    """Construct a ProfileMetric from one of the kind records above."""
    if isinstance(kind, FlatTorus):
        if not (kind.c > 0 and kind.base_length > 0):
            raise MetricError(f"flat torus needs c > 0 and base_length > 0, got {kind}")
        label = f"flat-torus-c{kind.c:g}-L{kind.base_length:g}"
        return _coded(Topology.TORUS, kind.base_length, label, _prof.PROF_CONST, [kind.c])
    if isinstance(kind, RoundSphere):
        if not kind.radius > 0:
            raise MetricError(f"sphere radius must be positive, got {kind.radius}")
        label = f"round-sphere-R{kind.radius:g}"
        return _coded(
            Topology.SPHERE, math.pi * kind.radius, label, _prof.PROF_SIN, [kind.radius]
        )
    if isinstance(kind, FourierTorus):
        amps = list(kind.amplitudes)
        phases = list(kind.phases)
        if len(amps) != len(phases):
            raise MetricError("amplitudes and phases must have equal length")
        if kind.base_length <= 0:
            raise MetricError("base_length must be positive")
        if kind.mean - sum(abs(a) for a in amps) <= 0:
            raise MetricError("Fourier profile is not strictly positive")
        params = [kind.mean, TWO_PI / kind.base_length, len(amps)]
        for a, b in zip(amps, phases):
            params += [a, b]
        label = f"fourier-torus-m{kind.mean:g}-M{len(amps)}"
        return _coded(Topology.TORUS, kind.base_length, label, _prof.PROF_TRIG, params)
    if isinstance(kind, CustomProfile):
        if kind.base_length <= 0:
            raise MetricError("base_length must be positive")
        metric = ProfileMetric(
            Topology(kind.topology), float(kind.base_length), kind.profile, kind.label,
            _prof.PROF_PYTHON, (), float(kind.x_min),
        )
        diag = profile_diagnostics(metric, 4096)
        if not diag.ok:
            raise MetricError(f"profile {kind.label!r} rejected: {'; '.join(diag.problems)}")
        return metric
    raise TypeError(f"unknown metric kind {kind!r}")


def validate_bridge_spec(spec: BridgeSpec) -> None:
    eps, w = spec.band_half_width, spec.bridge_width
    band = BandProfile(spec.band_profile)
    if not 0.0 < eps < 0.5:
        raise MetricError(f"band_half_width must lie in (0, 1/2), got {eps}")
    if not w > 0.0:
        raise MetricError(f"bridge_width must be positive, got {w}")
    if spec.flat_length < TWO_PI:
        raise MetricError(
            f"flat_length must be at least 2*pi (got {spec.flat_length}); shorter flat "
            "parts let non-band loops return by time 2*pi"
        )
    # the band formula is continued across the bridge; it must stay defined and
    # above the flat value there for the bridge to be monotone
    outer = eps + w
    limit = math.pi / 2 if band is BandProfile.ROUND_COS else 1.0
    if outer >= limit:
        raise MetricError(f"band plus bridge ({outer}) exceeds the band formula domain")
    edge = math.cos(outer) if band is BandProfile.ROUND_COS else math.sqrt(1 - outer**2)
    if edge <= spec.flat_value:
        raise MetricError("bridge too wide: band formula drops below the flat value")


def build_bridge_metric(spec: BridgeSpec) -> ProfileMetric:
    """Torus of revolution with a round equatorial band, bridges and a flat part."""
    validate_bridge_spec(spec)
    band = BandProfile(spec.band_profile)
    L = spec.base_length
    kind = _prof.BAND_COS if band is BandProfile.ROUND_COS else _prof.BAND_SQRT
    params = [kind, spec.band_half_width, spec.bridge_width, spec.flat_value, L, -L / 2]
    label = (
        f"bridge-{band.value}-eps{spec.band_half_width:g}-w{spec.bridge_width:g}"
        f"-flat{spec.flat_length:.6g}"
    )
    return _coded(Topology.TORUS, L, label, _prof.PROF_BRIDGE, params, x_min=-L / 2)


@dataclass
class ProfileDiagnostics:
    grid: np.ndarray
    a: np.ndarray
    curvature: np.ndarray
    min_a: float
    max_a: float
    periodicity_residual: float
    pole_residual: float
    second_derivative_residual: float
    problems: list

    @property
    def ok(self) -> bool:
        return not self.problems


def profile_diagnostics(metric: ProfileMetric, grid_size: int = 4096) -> ProfileDiagnostics:
    """Sample the invariant residuals of a profile; never raises on bad data."""
    if grid_size < 16:
        grid_size = 16
    L = metric.base_length
    problems = []
    h = L / grid_size
    x = metric.x_min + (np.arange(grid_size) + 0.5) * h
    try:
        a, a1, a2 = (np.asarray(v, dtype=float) * np.ones_like(x) for v in metric.profile(x))
    except Exception as exc:  # report, never throw
        nan = np.full_like(x, np.nan)
        return ProfileDiagnostics(x, nan, nan, math.nan, math.nan, math.nan, math.nan,
                                  math.nan, [f"profile evaluation failed: {exc}"])
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = -a2 / a
    min_a = float(np.min(a)) if np.all(np.isfinite(a)) else math.nan
    if not min_a > 0:
        problems.append(f"profile not strictly positive on the interior (min a = {min_a})")

    per_res = 0.0
    pole_res = 0.0
    ends = np.array([metric.x_min, metric.x_min + L])
    ea, ea1, ea2 = (np.asarray(v, dtype=float) * np.ones(2) for v in metric.profile(ends))
    if metric.is_torus:
        per_res = float(max(abs(ea[0] - ea[1]), abs(ea1[0] - ea1[1]), abs(ea2[0] - ea2[1])))
        if not per_res <= 1e-10:
            problems.append(f"profile not periodic at the wrap point (residual {per_res:.3g})")
    else:
        pole_res = float(max(abs(ea[0]), abs(ea[1]), abs(ea1[0] - 1.0), abs(ea1[1] + 1.0)))
        if not pole_res <= 1e-10:
            problems.append(f"pole closure violated (residual {pole_res:.3g})")

    # a'' against central differences of a'
    hd = 0.5 * h
    _, ap, _ = metric.profile(x + hd)
    _, am, _ = metric.profile(x - hd)
    fd = (np.asarray(ap) - np.asarray(am)) / (2 * hd)
    d2_res = float(np.max(np.abs(fd - a2))) if np.all(np.isfinite(fd)) else math.nan
    if not d2_res <= 1e-3 * (1.0 + float(np.max(np.abs(a2)))):
        problems.append(f"a'' inconsistent with a' (residual {d2_res:.3g})")

    return ProfileDiagnostics(
        grid=x, a=a, curvature=curv, min_a=min_a,
        max_a=float(np.max(a)) if np.all(np.isfinite(a)) else math.nan,
        periodicity_residual=per_res, pole_residual=pole_res,
        second_derivative_residual=d2_res, problems=problems,
    )
