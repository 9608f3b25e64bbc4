"""Side-condition and stationarity diagnostics driven by one ExperimentConfig."""

import time

from loguru import logger

from .config import ExperimentConfig
from .diagnostics import (
    ConditionReport,
    ContinuityReport,
    ScalingReport,
    ShiftReport,
    condition_trend,
    continuity_check,
    h_sum,
    local_osc_stat,
    scaling_check,
    shift_invariance,
)
from .levels import levels_from_tau_prime, limiting_rates
from .report import EXECUTION_FIELDS, DiagnosticsReport, WallClock, emit_diagnostics, started_at

FINITE_TERMS = 3


class DiagnosticsWorkflow:
    """Runs the diagnostics an ExperimentConfig asks for.

    `n_grid` enables the condition trends, `scale` the scaling check,
    `epsilon_grid` the continuity check (d >= 2 only) and `shift` the
    stationarity check on joint exceedances.
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.spec = cfg.process_spec()

    def _common(self) -> dict:
        return {
            "replicates": self.cfg.replicates,
            "master_seed": self.cfg.seed,
            "num_workers": self.cfg.num_workers,
        }

    def conditions(self) -> list[ConditionReport]:
        cfg, spec = self.cfg, self.spec
        if not cfg.n_grid:
            return []
        kwargs = {**self._common(), "k": cfg.blocks}
        reports = []
        if spec.d >= 2:
            logger.info(f"H-sum over n grid {cfg.n_grid}")
            reports.append(condition_trend("h_sum", [h_sum(spec, cfg.tau_prime, n, **kwargs) for n in cfg.n_grid]))
            entries = [h_sum(spec, cfg.tau_prime, n, directions="both", **kwargs) for n in cfg.n_grid]
            reports.append(condition_trend("h_sum_both", entries))
            entries = [h_sum(spec, cfg.tau_prime, n, terms=FINITE_TERMS, **kwargs) for n in cfg.n_grid]
            reports.append(condition_trend(f"h_sum_terms{FINITE_TERMS}", entries))
        logger.info(f"Local oscillation statistic over n grid {cfg.n_grid}")
        reports.append(condition_trend("local_osc", [local_osc_stat(spec, cfg.tau_prime, n, **kwargs)
                                                     for n in cfg.n_grid]))
        if spec.d >= 2:
            for j in range(spec.d):
                entries = [local_osc_stat(spec, cfg.tau_prime, n, margin=j, **kwargs) for n in cfg.n_grid]
                reports.append(condition_trend(f"local_osc_{j + 1}", entries))
        for report in reports:
            logger.info(f"{report.statistic}: {report.hint}")
        return reports

    def scaling(self) -> ScalingReport | None:
        if self.cfg.scale is None:
            return None
        return scaling_check(self.spec, self.cfg.tau_prime, self.cfg.n, self.cfg.scale, k=self.cfg.blocks,
                             **self._common())

    def continuity(self) -> ContinuityReport | None:
        if not self.cfg.epsilon_grid:
            return None
        if self.spec.d < 2:
            logger.warning("Continuity check needs at least two margins; skipped")
            return None
        nu = limiting_rates(self.spec, self.cfg.tau_prime).nu
        report = continuity_check(self.spec, list(nu[:-1]), self.cfg.epsilon_grid, self.cfg.n, **self._common())
        logger.info(f"Continuity gap at smallest epsilon: {report.gap}")
        return report

    def shift(self) -> ShiftReport | None:
        if self.cfg.shift is None:
            return None
        levels = levels_from_tau_prime(self.cfg.tau_prime, self.cfg.n)
        return shift_invariance(self.spec, levels, self.cfg.n, self.cfg.shift, **self._common())

    def run(self) -> DiagnosticsReport:
        start = time.perf_counter()
        stamp = started_at()
        report = DiagnosticsReport(
            config=self.cfg.model_dump(exclude=EXECUTION_FIELDS),
            process=self.spec.to_dict(),
            conditions=self.conditions(),
            scaling=self.scaling(),
            continuity=self.continuity(),
            shift=self.shift(),
        )
        report.wall_clock = WallClock(started_at=stamp, elapsed_seconds=time.perf_counter() - start,
                                      num_workers=self.cfg.num_workers)
        return report


def run_diagnostics(cfg: ExperimentConfig):
    report = DiagnosticsWorkflow(cfg).run()
    written = emit_diagnostics(report, cfg.formats, cfg.output_dir)
    return report, written
