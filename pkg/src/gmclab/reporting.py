"""Experiment reports: JSON summaries and RFC-4180 CSV curves.

CSV bodies are deterministic functions of the resolved config and seed
(no timestamps), so byte-identical reruns certify determinism.  NaN
estimates serialize as null with the pass flag forced to False.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field

from .errors import IoError


@dataclass
class Metric:
    name: str
    estimate: float | None
    se: float | None = None
    target: float | None = None
    tolerance: float | None = None
    passed: bool = False


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    metrics: list
    curves: dict = field(default_factory=dict)  # name -> {"header": [...], "rows": [[...]]}
    wall_time: float = 0.0
    n_replicas: int = 0
    master_seed: int = 0

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)


def _sanitize(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def report_to_dict(report: ExperimentReport) -> dict:
    metrics = []
    for m in report.metrics:
        d = asdict(m)
        if isinstance(d["estimate"], float) and not math.isfinite(d["estimate"]):
            d["estimate"] = None
            d["passed"] = False
        for k in ("se", "target", "tolerance"):
            d[k] = _sanitize(d[k])
        metrics.append(d)
    return {
        "experiment": report.experiment,
        "config": report.config,
        "metrics": metrics,
        "curves": report.curves,
        "wall_time": report.wall_time,
        "n_replicas": report.n_replicas,
        "master_seed": report.master_seed,
        "passed": report.passed,
    }


def parse_report(path) -> ExperimentReport:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    metrics = [Metric(**m) for m in d["metrics"]]
    return ExperimentReport(
        experiment=d["experiment"], config=d["config"], metrics=metrics,
        curves=d["curves"], wall_time=d["wall_time"],
        n_replicas=d["n_replicas"], master_seed=d["master_seed"],
    )


def _format_cell(x):
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return format(x, ".17g")
    return str(x)


def emit_report(report: ExperimentReport, out_dir) -> list:
    """Write report.json plus one CSV per curve; returns the file list."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        files = []
        jpath = os.path.join(out_dir, f"{report.experiment}_report.json")
        with open(jpath, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report_to_dict(report), fh, sort_keys=True, indent=2)
            fh.write("\n")
        files.append(jpath)
        for name, curve in report.curves.items():
            cpath = os.path.join(out_dir, f"{report.experiment}_{name}.csv")
            with open(cpath, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(curve["header"]) + "\n")
                for row in curve["rows"]:
                    fh.write(",".join(_format_cell(x) for x in row) + "\n")
            files.append(cpath)
        return files
    except OSError as exc:
        raise IoError(str(exc)) from exc
