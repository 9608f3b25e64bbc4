"""Run reports and their JSON/CSV renderings.

CSV schemas (headers are fixed):
    estimates.csv          estimator,value,std_error,event_count,target,delta
    multiplicity.csv,
    cluster_sizes*.csv,
    projected_*.csv        count_vector,frequency,block_count
    diagnostics.csv        statistic,grid_kind,x,value,std_error,hint
    plot_<statistic>.csv   x,y,std_error
"""

import csv
import os
from datetime import datetime
from pathlib import Path
from typing import Optional

import pytz
from loguru import logger
from pydantic import BaseModel

from .diagnostics import ConditionReport, ContinuityReport, DecompositionReport, ScalingReport, ShiftReport
from .estimators import Estimate, EstimateReport
from .levels import RateSummary
from .point_process import ClusterSizeHistogram, MultiplicityHistogram

ESTIMATES_HEADER = ["estimator", "value", "std_error", "event_count", "target", "delta"]
HISTOGRAM_HEADER = ["count_vector", "frequency", "block_count"]
DIAGNOSTICS_HEADER = ["statistic", "grid_kind", "x", "value", "std_error", "hint"]
PLOT_HEADER = ["x", "y", "std_error"]
FORMATS = ("json", "csv")
# config fields that describe how a run executes, not what it computes
EXECUTION_FIELDS = {"num_workers", "output_dir"}


class ReportWriteError(OSError):
    def __init__(self, path, reason):
        super().__init__(f"cannot write report to {path}: {reason}")
        self.path = str(path)


def started_at() -> str:
    tz_info = pytz.timezone(os.environ.get("TZ", "UTC"))
    return datetime.now(tz_info).isoformat()


class WallClock(BaseModel):
    started_at: str
    elapsed_seconds: float
    num_workers: int


class MarginProjection(BaseModel):
    margin: int
    factor: float
    histogram: ClusterSizeHistogram


def multiplicity_label(count_vector) -> str:
    return "multiplicity[" + ";".join(str(int(c)) for c in count_vector) + "]"


class RunReport(BaseModel):
    """Everything one experiment produced; `wall_clock` is the only nondeterministic field."""

    config: dict
    process: dict
    replicates: int
    draws: int
    rates: RateSummary
    exact_rates: Optional[dict[str, float]] = None
    estimates: EstimateReport
    multiplicity: MultiplicityHistogram
    cluster_sizes: ClusterSizeHistogram
    marginal_cluster_sizes: list[ClusterSizeHistogram]
    projections: list[MarginProjection]
    decomposition: Optional[DecompositionReport] = None
    combination_gap: Optional[float] = None
    conditions: list[ConditionReport] = []
    scaling: Optional[ScalingReport] = None
    continuity: Optional[ContinuityReport] = None
    targets: dict[str, float] = {}
    deltas: dict[str, float] = {}
    wall_clock: Optional[WallClock] = None

    def observed(self) -> dict[str, Estimate]:
        """Every reported quantity under the label its target uses."""
        observed = dict(self.estimates.named())
        for row in self.multiplicity.rows:
            observed[multiplicity_label(row.count_vector)] = Estimate(value=row.frequency, event_count=row.block_count)
        for j, hist in enumerate(self.marginal_cluster_sizes):
            for row in hist.rows:
                observed[f"cluster_size_{j + 1}[{row.count_vector[0]}]"] = Estimate(
                    value=row.frequency, event_count=row.block_count
                )
        observed["mean_cluster_size"] = Estimate(
            value=self.cluster_sizes.mean, event_count=self.cluster_sizes.nonempty_blocks,
            flag=None if self.cluster_sizes.defined else "undefined",
        )
        return observed

    def to_json(self, include_wall_clock: bool = True) -> str:
        exclude = None if include_wall_clock else {"wall_clock"}
        return self.model_dump_json(indent=2, exclude=exclude)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.model_validate_json(text)


def compute_deltas(observed: dict[str, Estimate], targets: dict[str, float]) -> dict[str, float]:
    """|estimate - target| for every target; a histogram cell never observed counts as frequency 0."""
    deltas = {}
    for label, target in targets.items():
        estimate = observed.get(label)
        if estimate is None:
            if label.startswith(("multiplicity[", "cluster_size_")):
                deltas[label] = abs(target)
            continue
        if estimate.defined:
            deltas[label] = abs(estimate.value - target)
    return deltas


def _blank(value):
    return "" if value is None else value


def write_csv(path: Path, rows: list[dict], header: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=header, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _blank(row.get(key)) for key in header})


def estimate_rows(report: RunReport) -> list[dict]:
    rows = []
    observed = report.observed()
    for label, estimate in observed.items():
        rows.append({
            "estimator": label,
            "value": estimate.value,
            "std_error": estimate.std_error,
            "event_count": estimate.event_count,
            "target": report.targets.get(label),
            "delta": report.deltas.get(label),
        })
    # targets with no observed cell (frequency 0) still get a row
    for label, target in report.targets.items():
        if label not in observed:
            rows.append({"estimator": label, "value": 0.0, "event_count": 0, "target": target,
                         "delta": report.deltas.get(label)})
    return rows


def histogram_rows(hist) -> list[dict]:
    return [
        {
            "count_vector": ";".join(str(c) for c in row.count_vector),
            "frequency": row.frequency,
            "block_count": row.block_count,
        }
        for row in hist.rows
    ]


def diagnostic_series(report) -> dict[str, dict]:
    """Plot series keyed by statistic name: grid kind, x, y and standard errors."""
    series = {}
    for condition in report.conditions:
        series[condition.statistic] = {
            "grid_kind": condition.grid_kind,
            "x": condition.grid,
            "y": condition.values,
            "std_error": condition.std_errors,
            "hint": condition.hint,
        }
        if condition.first_terms is not None:
            series[f"{condition.statistic}_first_term"] = {
                "grid_kind": condition.grid_kind,
                "x": condition.grid,
                "y": condition.first_terms,
                "std_error": [None] * len(condition.grid),
                "hint": None,
            }
    if report.continuity is not None:
        series["continuity_eta"] = {
            "grid_kind": "epsilon",
            "x": report.continuity.epsilon_grid,
            "y": report.continuity.values,
            "std_error": [None] * len(report.continuity.epsilon_grid),
            "hint": None,
        }
    return series


def diagnostic_rows(report) -> list[dict]:
    rows = []
    for statistic, s in diagnostic_series(report).items():
        for x, y, se in zip(s["x"], s["y"], s["std_error"]):
            rows.append({"statistic": statistic, "grid_kind": s["grid_kind"], "x": x, "value": y,
                         "std_error": se, "hint": s["hint"]})
    if report.continuity is not None:
        rows.append({"statistic": "continuity_subvector_eta", "grid_kind": "epsilon", "x": 0.0,
                     "value": report.continuity.subvector_value})
        rows.append({"statistic": "continuity_gap", "grid_kind": "epsilon", "x": report.continuity.epsilon_grid[-1],
                     "value": report.continuity.gap})
    if report.scaling is not None:
        rows.append({"statistic": "scaling_rate_ratio", "grid_kind": "c", "x": report.scaling.c,
                     "value": report.scaling.ratio})
        rows.append({"statistic": "scaling_tv_distance", "grid_kind": "c", "x": report.scaling.c,
                     "value": report.scaling.tv_distance})
    return rows


def run_summary_rows(report: RunReport) -> list[dict]:
    rows = diagnostic_rows(report)
    if report.decomposition is not None:
        rows.append({"statistic": "multi_margin_mass", "grid_kind": "", "value": report.decomposition.multi_margin_mass})
        rows.append({"statistic": "decomposition_max_deviation", "grid_kind": "",
                     "value": report.decomposition.max_deviation})
    if report.combination_gap is not None:
        rows.append({"statistic": "combination_gap", "grid_kind": "", "value": report.combination_gap})
    return rows


def _write_csv_tables(report: RunReport, out_dir: Path) -> list[Path]:
    written = []

    def emit(name, rows, header):
        path = out_dir / name
        write_csv(path, rows, header)
        written.append(path)

    emit("estimates.csv", estimate_rows(report), ESTIMATES_HEADER)
    emit("multiplicity.csv", histogram_rows(report.multiplicity), HISTOGRAM_HEADER)
    emit("cluster_sizes.csv", histogram_rows(report.cluster_sizes), HISTOGRAM_HEADER)
    for j, hist in enumerate(report.marginal_cluster_sizes):
        emit(f"cluster_sizes_{j + 1}.csv", histogram_rows(hist), HISTOGRAM_HEADER)
    for projection in report.projections:
        emit(f"projected_{projection.margin}.csv", histogram_rows(projection.histogram), HISTOGRAM_HEADER)
    emit("diagnostics.csv", run_summary_rows(report), DIAGNOSTICS_HEADER)
    written.extend(_write_plots(report, out_dir))
    return written


def _write_plots(report, out_dir: Path) -> list[Path]:
    written = []
    for statistic, s in diagnostic_series(report).items():
        path = out_dir / f"plot_{statistic}.csv"
        rows = [{"x": x, "y": y, "std_error": se} for x, y, se in zip(s["x"], s["y"], s["std_error"])]
        write_csv(path, rows, PLOT_HEADER)
        written.append(path)
    return written


def emit_report(report: RunReport, formats, out_dir) -> list[Path]:
    """Write the report in each requested format under `out_dir`; returns the written paths."""
    formats = list(formats)
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError(f"format: expected one of {FORMATS}, got '{fmt}'")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(out_dir, e.strerror or e) from e

    written = []
    try:
        if "json" in formats:
            path = out_dir / "report.json"
            path.write_text(report.to_json(), encoding="utf-8")
            written.append(path)
        if "csv" in formats:
            written.extend(_write_csv_tables(report, out_dir))
    except OSError as e:
        raise ReportWriteError(e.filename or out_dir, e.strerror or e) from e
    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written


class DiagnosticsReport(BaseModel):
    config: dict
    process: dict
    conditions: list[ConditionReport] = []
    scaling: Optional[ScalingReport] = None
    continuity: Optional[ContinuityReport] = None
    shift: Optional[ShiftReport] = None
    wall_clock: Optional[WallClock] = None

    def rows(self) -> list[dict]:
        rows = diagnostic_rows(self)
        if self.shift is not None:
            for statistic, value in (("shift_first", self.shift.first), ("shift_shifted", self.shift.shifted)):
                rows.append({"statistic": statistic, "grid_kind": "shift", "x": self.shift.shift, "value": value})
            rows.append({"statistic": "shift_difference", "grid_kind": "shift", "x": self.shift.shift,
                         "value": self.shift.difference, "std_error": self.shift.std_error})
        return rows

    def to_json(self, include_wall_clock: bool = True) -> str:
        exclude = None if include_wall_clock else {"wall_clock"}
        return self.model_dump_json(indent=2, exclude=exclude)


def emit_diagnostics(report: DiagnosticsReport, formats, out_dir) -> list[Path]:
    """diagnostics.json, diagnostics.csv and one plot CSV per statistic."""
    formats = list(formats)
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError(f"format: expected one of {FORMATS}, got '{fmt}'")
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = out_dir / "diagnostics.json"
            path.write_text(report.to_json(), encoding="utf-8")
            written.append(path)
        if "csv" in formats:
            path = out_dir / "diagnostics.csv"
            write_csv(path, report.rows(), DIAGNOSTICS_HEADER)
            written.append(path)
            written.extend(_write_plots(report, out_dir))
    except OSError as e:
        raise ReportWriteError(e.filename or out_dir, e.strerror or e) from e
    logger.info(f"Wrote {len(written)} diagnostics files to {out_dir}")
    return written
