"""Scenario configuration: YAML in, validated dataclasses out."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..geometry import BandProfile, BridgeSpec, MetricError, validate_bridge_spec

TWO_PI = 2.0 * math.pi

SCENARIOS = ("flat-torus", "round-sphere", "bridge-torus", "perturbed-torus", "custom")
EXPERIMENTS = ("flow", "loopset", "weyl", "supnorm", "return", "trace")
CACHE_POLICIES = ("read-write", "refresh", "off")
DEFAULT_LAMBDA_CEILING = 60.0

# fields that change where results go but not what they are
_UNHASHED = ("output_dir", "cache", "cache_dir")


class ConfigError(ValueError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


@dataclass
class LoopsetParams:
    base_points: dict = field(default_factory=dict)
    T_max: float = TWO_PI + 0.1
    n_directions: int = 4096
    loop_tol: float = 1e-4
    cluster_tol: float = 1e-3
    flow_tol: float = 1e-10
    random_points: int = 0


@dataclass
class ReturnParams:
    point: str = ""
    T_values: list = field(default_factory=lambda: [TWO_PI])
    lam: float = 40.0
    k_max: int = 5


@dataclass
class FitParams:
    lambda_min: float = 5.0
    lambda_max: float | None = None
    bins_per_decade: int = 8


@dataclass
class FlowParams:
    t_end: float = 50.0
    directions: int = 4
    tolerance: float = 1e-10
    samples: int = 50


@dataclass
class ScenarioConfig:
    scenario: str
    metric: dict = field(default_factory=dict)
    lambda_max: float = 30.0
    grid_size: int = 2048
    spectrum_method: str = "numeric"
    cluster_tol: float = 1e-6
    loopset: LoopsetParams = field(default_factory=LoopsetParams)
    evaluation_points: dict = field(default_factory=dict)
    return_measure: ReturnParams = field(default_factory=ReturnParams)
    fit: FitParams = field(default_factory=FitParams)
    flow_check: FlowParams = field(default_factory=FlowParams)
    trace_lambdas: list = field(default_factory=lambda: [10.0, 20.0, 30.0])
    experiments: list = field(default_factory=lambda: list(EXPERIMENTS))
    output_dir: str = "lab-out"
    seed: int = 0
    cache: str = "read-write"
    cache_dir: str | None = None
    lambda_ceiling: float = DEFAULT_LAMBDA_CEILING
    allow_above_ceiling: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        d = self.to_dict()
        for k in _UNHASHED:
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


_NESTED = {"loopset": LoopsetParams, "return_measure": ReturnParams, "fit": FitParams,
           "flow_check": FlowParams}


def _scenario_defaults(scenario: str) -> dict:
    if scenario == "flat-torus":
        return {
            "metric": {"c": 1.0, "base_length": TWO_PI},
            "lambda_max": 40.0,
            "spectrum_method": "analytic",
            "cluster_tol": 1e-12,
            "loopset": {"base_points": {"origin": [0.0, 0.0]}, "T_max": 20.0},
            "evaluation_points": {"origin": [0.0, 0.0], "generic": [1.234, 0.5]},
            "return_measure": {"point": "origin", "T_values": [1.0, TWO_PI], "lam": 40.0},
            "fit": {"lambda_min": 5.0, "lambda_max": 40.0},
        }
    if scenario == "round-sphere":
        return {
            "metric": {"radius": 1.0},
            "lambda_max": 40.0,
            "spectrum_method": "numeric",
            "cluster_tol": 1e-3,
            "loopset": {"base_points": {"equator": [math.pi / 2, 0.0]}},
            "evaluation_points": {"pole": [0.0, 0.0], "equator": [math.pi / 2, 0.0]},
            "return_measure": {"point": "pole", "T_values": [TWO_PI], "lam": 40.0},
            "fit": {"lambda_min": 1.0, "lambda_max": math.sqrt(30 * 31) + 0.01},
        }
    if scenario == "bridge-torus":
        return {
            "metric": {"band_half_width": 0.25, "bridge_width": 0.25,
                       "flat_length": TWO_PI + 1.0, "band_profile": "round-cos"},
            "lambda_max": 60.0,
            "grid_size": 4096,
            "loopset": {"base_points": {"band": [0.0, 0.0]}},
            # bridge and flat points are filled in from the metric geometry
            "evaluation_points": {},
            "return_measure": {"point": "band", "T_values": [TWO_PI], "lam": 60.0},
            "fit": {"lambda_min": 5.0, "lambda_max": 60.0},
        }
    if scenario == "perturbed-torus":
        return {
            "metric": {"mean": 1.0, "modes": 5, "amplitude_bound": 0.05, "base_length": TWO_PI},
            "lambda_max": 30.0,
            "seed": 7,
            "loopset": {"base_points": {}, "random_points": 5, "T_max": 10.0},
            "evaluation_points": {"origin": [0.0, 0.0]},
            "return_measure": {"point": "origin", "T_values": [1.0], "lam": 30.0},
            "fit": {"lambda_min": 5.0, "lambda_max": 30.0},
        }
    if scenario == "custom":
        return {
            "metric": {"profile": "", "topology": "torus", "base_length": TWO_PI, "x_min": 0.0},
            "lambda_max": 20.0,
            "loopset": {"base_points": {"origin": [0.0, 0.0]}},
            "evaluation_points": {"origin": [0.0, 0.0]},
            "return_measure": {"point": "origin", "T_values": [1.0], "lam": 20.0},
            "fit": {"lambda_min": 2.0, "lambda_max": 20.0},
            "trace_lambdas": [10.0],
        }
    raise ConfigError("scenario", f"unknown scenario {scenario!r}; choose from {SCENARIOS}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in (
                "base_points", "evaluation_points"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build a validated config; unspecified fields take the scenario defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    if "scenario" not in raw:
        raise ConfigError("scenario", "missing")
    scenario = raw["scenario"]
    merged = _merge(_scenario_defaults(scenario), raw)
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    kwargs = {}
    for name, value in merged.items():
        if name in _NESTED:
            cls = _NESTED[name]
            sub_known = {f.name for f in fields(cls)}
            if not isinstance(value, dict):
                raise ConfigError(name, "must be a mapping")
            bad = set(value) - sub_known
            if bad:
                raise ConfigError(f"{name}.{sorted(bad)[0]}", "unknown field")
            value = cls(**value)
        kwargs[name] = value
    config = ScenarioConfig(**kwargs)
    validate_config(config)
    return config


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from exc
    if overrides:
        raw = _merge(raw, overrides)
    return config_from_dict(raw)


def _positive(name, value):
    if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
        raise ConfigError(name, f"must be a positive number, got {value!r}")


def _point(name, value):
    if not (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(name, f"must be a pair [x, theta], got {value!r}")


def validate_config(c: ScenarioConfig) -> None:
    if c.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {c.scenario!r}")
    _positive("lambda_max", c.lambda_max)
    _positive("lambda_ceiling", c.lambda_ceiling)
    if c.lambda_max > c.lambda_ceiling and not c.allow_above_ceiling:
        raise ConfigError("lambda_max", f"{c.lambda_max} exceeds the ceiling {c.lambda_ceiling}; "
                          "set allow_above_ceiling: true to override")
    if not (isinstance(c.grid_size, int) and c.grid_size >= 128):
        raise ConfigError("grid_size", "must be an integer >= 128")
    if c.spectrum_method not in ("numeric", "analytic"):
        raise ConfigError("spectrum_method", "must be 'numeric' or 'analytic'")
    if c.spectrum_method == "analytic" and c.scenario not in ("flat-torus", "round-sphere"):
        raise ConfigError("spectrum_method", f"no closed form for scenario {c.scenario}")
    _positive("cluster_tol", c.cluster_tol)
    if c.cache not in CACHE_POLICIES:
        raise ConfigError("cache", f"must be one of {CACHE_POLICIES}")
    if not isinstance(c.seed, int):
        raise ConfigError("seed", "must be an integer")
    bad = [e for e in c.experiments if e not in EXPERIMENTS]
    if bad:
        raise ConfigError("experiments", f"unknown experiment {bad[0]!r}")
    lp = c.loopset
    for name in ("T_max", "loop_tol", "cluster_tol", "flow_tol"):
        _positive(f"loopset.{name}", getattr(lp, name))
    if not (isinstance(lp.n_directions, int) and lp.n_directions >= 64):
        raise ConfigError("loopset.n_directions", "must be an integer >= 64")
    if not (isinstance(lp.random_points, int) and lp.random_points >= 0):
        raise ConfigError("loopset.random_points", "must be a non-negative integer")
    for k, v in lp.base_points.items():
        _point(f"loopset.base_points.{k}", v)
    for k, v in c.evaluation_points.items():
        _point(f"evaluation_points.{k}", v)
    rm = c.return_measure
    _positive("return_measure.lam", rm.lam)
    if rm.lam > c.lambda_max:
        raise ConfigError("return_measure.lam", "must not exceed lambda_max")
    if not (isinstance(rm.k_max, int) and rm.k_max >= 1):
        raise ConfigError("return_measure.k_max", "must be an integer >= 1")
    for T in rm.T_values:
        _positive("return_measure.T_values", T)
    f = c.fit
    _positive("fit.lambda_min", f.lambda_min)
    if f.lambda_max is not None and not f.lambda_min < f.lambda_max <= c.lambda_max * (1 + 1e-9):
        raise ConfigError("fit.lambda_max", "must lie in (fit.lambda_min, lambda_max]")
    if not (isinstance(f.bins_per_decade, int) and f.bins_per_decade >= 1):
        raise ConfigError("fit.bins_per_decade", "must be a positive integer")
    fl = c.flow_check
    _positive("flow_check.t_end", fl.t_end)
    _positive("flow_check.tolerance", fl.tolerance)
    for lam in c.trace_lambdas:
        _positive("trace_lambdas", lam)
        if lam > c.lambda_max:
            raise ConfigError("trace_lambdas", f"{lam} exceeds lambda_max {c.lambda_max}")
    _validate_metric(c)


def _validate_metric(c: ScenarioConfig) -> None:
    m = c.metric
    if c.scenario == "flat-torus":
        _positive("metric.c", m.get("c"))
        _positive("metric.base_length", m.get("base_length"))
    elif c.scenario == "round-sphere":
        _positive("metric.radius", m.get("radius"))
    elif c.scenario == "bridge-torus":
        for k in ("band_half_width", "bridge_width", "flat_length"):
            _positive(f"metric.{k}", m.get(k))
        if m["flat_length"] < TWO_PI:
            raise ConfigError("metric.flat_length",
                              f"must be at least 2*pi, got {m['flat_length']}")
        if m.get("band_profile") not in ("round-cos", "paper-sqrt"):
            raise ConfigError("metric.band_profile", "must be 'round-cos' or 'paper-sqrt'")
        try:
            validate_bridge_spec(BridgeSpec(m["band_half_width"], m["bridge_width"],
                                            m["flat_length"], BandProfile(m["band_profile"])))
        except MetricError as exc:
            raise ConfigError("metric", str(exc)) from exc
    elif c.scenario == "perturbed-torus":
        _positive("metric.mean", m.get("mean"))
        _positive("metric.base_length", m.get("base_length"))
        if not (isinstance(m.get("modes"), int) and m["modes"] >= 1):
            raise ConfigError("metric.modes", "must be a positive integer")
        b = m.get("amplitude_bound")
        if not (isinstance(b, (int, float)) and 0 <= b < 1.0 / m["modes"]):
            raise ConfigError("metric.amplitude_bound", "must lie in [0, 1/modes)")
    elif c.scenario == "custom":
        if not (isinstance(m.get("profile"), str) and ":" in m["profile"]):
            raise ConfigError("metric.profile", "must be an import path 'module:function'")
        if m.get("topology") not in ("torus", "sphere"):
            raise ConfigError("metric.topology", "must be 'torus' or 'sphere'")
        _positive("metric.base_length", m.get("base_length"))
