"""Report export and re-verification from stored files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..weyl import growth_exponent_fit
from . import naming
from .scenarios import ScenarioReport, zonal_pole_value, compare

FORMATS = frozenset({"csv", "json", "plotdata"})
# relative agreement required between a stored check value and its recomputation
VERIFY_RTOL = 1e-9


class ReportIOError(OSError):
    pass


def _f(v) -> str:
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_plot(path: Path, xs, ys) -> None:
    with path.open("w") as fh:
        for a, b in zip(xs, ys):
            fh.write(f"{_f(a)} {_f(b)}\n")


def report_directory(report: ScenarioReport, out_dir=None) -> Path:
    base = Path(out_dir if out_dir is not None else report.config.output_dir)
    return base / f"{report.config.scenario}-{report.config_hash[:12]}"


def export_report(report: ScenarioReport, formats=("csv", "json", "plotdata"),
                  out_dir=None) -> Path:
    """Write the report under <out_dir>/<scenario>-<config hash>/ and return that path.

    Everything except timing.json is a deterministic function of the config.
    """
    formats = set(formats)
    if not formats <= FORMATS:
        raise ValueError(f"unknown formats {sorted(formats - FORMATS)}")
    target = report_directory(report, out_dir)
    try:
        target.mkdir(parents=True, exist_ok=True)
        _export(report, formats, target)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {target}: {exc}") from exc
    return target


def _export(report, formats, target):
    rec = report.records
    csv_on, plot_on = "csv" in formats, "plotdata" in formats

    if "weyl" in rec:
        w = rec["weyl"]
        for name, s in w["series"].items():
            if csv_on:
                s.to_csv(target / naming.weyl_csv(name))
            if plot_on:
                _write_plot(target / naming.plot_file("remainder", name), s.lambdas, s.R)
        for name, pairs in w["remainder_pairs"].items():
            _write_rows(target / naming.remainder_csv(name), ["lambda", "abs_R"],
                        [[_f(a), _f(b)] for a, b in pairs])
        if csv_on:
            w["global"].to_csv(target / naming.GLOBAL_WEYL)
        if plot_on:
            _write_plot(target / naming.plot_file("global_remainder"), w["global"].lambdas,
                        w["global"].R)
        _write_json(target / naming.REMAINDER_FIT,
                    {name: f.to_json() for name, f in w["fits"].items()})
    if "supnorm" in rec:
        sn = rec["supnorm"]
        for name, pairs in sn["pairs"].items():
            _write_rows(target / naming.supnorm_csv(name), ["lambda", "value"],
                        [[_f(a), _f(b)] for a, b in pairs])
            if plot_on:
                _write_plot(target / naming.plot_file("supnorm", name),
                            [p[0] for p in pairs], [p[1] for p in pairs])
        _write_json(target / naming.SUPNORM_FIT, {
            "combined": sn["combined"].to_json(),
            "per_point": {name: f.to_json() for name, f in sn["fits"].items()},
        })
    if "return" in rec:
        for T, mu in rec["return"]["measures"].items():
            mu.to_csv(target / naming.mu_csv(T))
    if "loopset" in rec:
        for name, lr in rec["loopset"].items():
            lr.to_csv(target / naming.loopset_csv(name))
            lr.to_json(target / naming.loopset_json(name))
    if "flow" in rec:
        _write_json(target / naming.FLOW, rec["flow"])
    if "trace" in rec:
        _write_json(target / naming.TRACE, rec["trace"])

    summary = {
        "scenario": report.config.scenario,
        "config": report.config.to_dict(),
        "config_hash": report.config_hash,
        "points": {k: {n: list(p) for n, p in v.items()} for k, v in report.points.items()},
        "spectrum": rec.get("spectrum"),
        "metric": rec.get("metric"),
        "checks": [c.to_dict() for c in report.checks],
        "errors": report.errors,
        "passed": report.passed,
        "provenance": report.provenance,
    }
    for k in ("output_dir", "cache", "cache_dir"):
        summary["config"].pop(k, None)
    _write_json(target / naming.SUMMARY, summary)
    _write_json(target / naming.TIMING, report.timings)


# ---------------------------------------------------------------------------
# verify


def _read_pairs(path: Path):
    with path.open() as fh:
        rows = list(csv.reader(fh))
    return [(float(a), float(b)) for a, b in rows[1:]]


def _read_mu(path: Path) -> dict:
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    return {int(r["k"]): complex(float(r["re"]), float(r["im"])) for r in rows}


def recompute_value(directory: Path, recipe: dict) -> float | None:
    """Re-derive a check value from stored files; None when only the stored value exists."""
    kind = recipe.get("kind", "stored")
    if kind == "stored":
        return None
    if kind == "fit":
        pairs = [p for f in recipe["files"] for p in _read_pairs(directory / f)]
        return growth_exponent_fit(pairs, bins_per_decade=recipe["bins_per_decade"]).exponent
    if kind == "fit_difference":
        a, b = (growth_exponent_fit(_read_pairs(directory / f),
                                    bins_per_decade=recipe["bins_per_decade"]).exponent
                for f in recipe["files"])
        return a - b
    if kind == "mu_max":
        mu = _read_mu(directory / recipe["file"])
        return max(abs(v) for k, v in mu.items() if k >= 1)
    if kind == "mu_plus_one":
        return abs(_read_mu(directory / recipe["file"])[recipe["k"]] + 1.0)
    if kind == "json":
        value = json.loads((directory / recipe["file"]).read_text())[recipe["key"]]
        return abs(value - recipe["target"]) if "target" in recipe else value
    if kind == "lsp":
        lsp = json.loads((directory / recipe["file"]).read_text())["lsp"]
        return min((abs(t - recipe["target"]) for t in lsp), default=math.inf)
    if kind == "sphere_pole_oracle":
        pairs = _read_pairs(directory / recipe["file"])
        return max(abs(v - zonal_pole_value(lam, recipe["radius"])) for lam, v in pairs)
    raise ValueError(f"unknown recompute kind {kind!r}")


def verify_report(directory) -> dict:
    """Re-check every stored acceptance check against the stored data files.

    Returns {"checks": [...], "consistent": bool, "passed": bool}.  A check is
    consistent when its recomputed value matches the stored one.
    """
    directory = Path(directory)
    summary = json.loads((directory / naming.SUMMARY).read_text())
    out = []
    consistent = True
    for c in summary["checks"]:
        stored = c["value"] if not isinstance(c["value"], str) else float(c["value"])
        try:
            again = recompute_value(directory, c["recompute"])
        except (OSError, KeyError, ValueError) as exc:
            out.append({**c, "recomputed": None, "consistent": False, "error": str(exc)})
            consistent = False
            continue
        value = stored if again is None else again
        same = again is None or math.isclose(again, stored, rel_tol=VERIFY_RTOL, abs_tol=1e-15) \
            or (math.isinf(again) and math.isinf(stored))
        consistent &= same
        out.append({**c, "recomputed": again, "consistent": same,
                    "passed": compare(value, c["op"], c["threshold"])})
    passed = consistent and not summary["errors"] and all(c["passed"] for c in out)
    return {"checks": out, "consistent": consistent, "passed": passed,
            "errors": summary["errors"]}


__all__ = ["export_report", "verify_report", "report_directory", "ReportIOError"]
