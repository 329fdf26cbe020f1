import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from revlab.lab import cli, scenarios
from revlab.lab.config import SCENARIOS, ConfigError, config_from_dict, load_config
from revlab.lab.report import export_report, verify_report
from revlab.lab.scenarios import perturbation_coefficients, run_scenario

SMALL_SPHERE = {
    "scenario": "round-sphere",
    "lambda_max": 12.0,
    "grid_size": 512,
    "loopset": {"n_directions": 256},
    "return_measure": {"lam": 12.0},
    "fit": {"lambda_min": 1.0, "lambda_max": 12.0},
    "flow_check": {"t_end": 10.0, "directions": 2, "samples": 10},
    "trace_lambdas": [10.0],
}


def _write(tmp_path, raw) -> Path:
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def _files(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())
            if p.is_file() and p.name != "timing.json"}


@pytest.fixture(scope="module")
def sphere_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("lab")
    cfg = config_from_dict({**SMALL_SPHERE, "output_dir": str(out)})
    report = run_scenario(cfg)
    return report, export_report(report)


def test_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    assert capsys.readouterr().out.split() == list(SCENARIOS)


@pytest.mark.parametrize("raw,field", [
    ({"scenario": "bridge-torus", "metric": {"flat_length": 1.0}}, "metric.flat_length"),
    ({"scenario": "round-sphere", "lambda_max": 80.0}, "lambda_max"),
    ({"scenario": "round-sphere", "grid_size": 16}, "grid_size"),
    ({"scenario": "round-sphere", "colour": 1}, "colour"),
    ({"scenario": "round-sphere", "loopset": {"T_max": -1.0}}, "loopset.T_max"),
    ({"scenario": "perturbed-torus", "spectrum_method": "analytic"}, "spectrum_method"),
    ({"scenario": "moebius"}, "scenario"),
])
def test_config_rejections_name_field(raw, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.field == field


def test_ceiling_override():
    cfg = config_from_dict({"scenario": "round-sphere", "lambda_max": 80.0,
                            "allow_above_ceiling": True})
    assert cfg.lambda_max == 80.0


def test_bad_config_exit_code(tmp_path, capsys):
    path = _write(tmp_path, {"scenario": "bridge-torus", "metric": {"flat_length": 1.0}})
    assert cli.main(["run", "--config", str(path)]) == cli.EXIT_BAD_CONFIG
    assert "flat_length" in capsys.readouterr().err


def test_shipped_configs_load():
    for path in sorted(Path(__file__).parents[1].joinpath("configs").glob("*.yaml")):
        assert load_config(path).scenario in SCENARIOS


def test_config_hash_ignores_output_location():
    a = config_from_dict({**SMALL_SPHERE, "output_dir": "x", "cache": "off"})
    b = config_from_dict({**SMALL_SPHERE, "output_dir": "y"})
    c = config_from_dict({**SMALL_SPHERE, "seed": 3})
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_sphere_run_checks(sphere_run):
    report, target = sphere_run
    assert not report.errors
    names = {c.name for c in report.checks}
    assert {"flow_hamiltonian_drift", "flow_time_reversal", "trace_identity_10"} <= names
    assert report.check("flow_time_reversal").passed
    assert report.check("trace_identity_10").passed
    assert target.name.startswith("round-sphere-")
    for name in ("summary.json", "timing.json", "global_weyl.csv", "weyl_pole.csv",
                 "supnorm_pole.csv", "loopset_equator.csv", "flow.json", "trace.json"):
        assert (target / name).exists(), name


def test_verify_is_consistent(sphere_run):
    report, target = sphere_run
    result = verify_report(target)
    assert result["consistent"]
    assert result["passed"] == report.passed
    assert sum(c["recomputed"] is not None for c in result["checks"]) >= 3


def test_verify_detects_tampering(sphere_run, tmp_path):
    _, target = sphere_run
    copy = tmp_path / target.name
    copy.mkdir()
    for name, data in _files(target).items():
        (copy / name).write_bytes(data)
    summary = json.loads((copy / "summary.json").read_text())
    for c in summary["checks"]:
        if c["recompute"]["kind"] != "stored":
            c["value"] = float(c["value"]) + 1.0
            break
    (copy / "summary.json").write_text(json.dumps(summary))
    assert cli.main(["verify", str(copy)]) == cli.EXIT_INCONSISTENT


def test_cli_run_is_deterministic(tmp_path):
    raw = {**SMALL_SPHERE, "experiments": ["weyl", "supnorm", "trace"], "cache": "off"}
    path = _write(tmp_path, raw)
    dirs = []
    for tag in ("a", "b"):
        code = cli.main(["run", "--config", str(path), "--out", str(tmp_path / tag)])
        assert code in (0, cli.EXIT_FAILED_CHECKS)
        (d,) = list((tmp_path / tag).iterdir())
        dirs.append(d)
    assert _files(dirs[0]) == _files(dirs[1])
    assert cli.main(["verify", str(dirs[0])]) in (0, cli.EXIT_FAILED_CHECKS)


def test_no_experiments_writes_summary_only(tmp_path):
    cfg = config_from_dict({**SMALL_SPHERE, "experiments": [], "output_dir": str(tmp_path)})
    target = export_report(run_scenario(cfg))
    assert sorted(p.name for p in target.iterdir()) == ["summary.json", "timing.json"]
    assert json.loads((target / "summary.json").read_text())["checks"] == []


def test_unknown_profile_raises(tmp_path):
    raw = {"scenario": "custom", "metric": {"profile": "revlab.lab.profiles:no_such"},
           "experiments": ["trace"], "output_dir": str(tmp_path)}
    with pytest.raises(AttributeError):
        run_scenario(config_from_dict(raw))


def test_experiment_failure_is_recorded(monkeypatch, tmp_path):
    def boom(*args):
        raise RuntimeError("trace broke")

    monkeypatch.setattr(scenarios, "_trace_experiment", boom)
    cfg = config_from_dict({**SMALL_SPHERE, "experiments": ["trace"],
                            "output_dir": str(tmp_path)})
    report = run_scenario(cfg)
    assert report.errors == {"trace": "RuntimeError: trace broke"}
    assert not report.passed
    target = export_report(report)
    assert cli.main(["verify", str(target)]) == cli.EXIT_FAILED_CHECKS


def test_perturbation_coefficients_seeded():
    a, ph, _ = perturbation_coefficients(1.0, 5, 0.05, seed=7)
    b, _, _ = perturbation_coefficients(1.0, 5, 0.05, seed=7)
    c, _, _ = perturbation_coefficients(1.0, 5, 0.05, seed=8)
    assert a == b != c
    assert np.all(np.abs(a) <= 0.05)
    assert all(0 <= p < 2 * math.pi for p in ph)
