import time

from loguru import logger

from .config import ExperimentConfig
from .diagnose_workflow import DiagnosticsWorkflow
from .diagnostics import combination_gap, multiplicity_decomposition
from .estimators import estimate_report, summarize_window
from .levels import levels_from_tau_prime, limiting_rates
from .oracle import OracleBudgetError, exact_rates
from .point_process import (
    cluster_size_histogram,
    default_block_count,
    mark_exceedances,
    mark_upcrossings,
    multiplicity_histogram,
    partition_blocks,
    project_multiplicity,
)
from .process import generate_window
from .replicates import ReplicateRunner
from .report import EXECUTION_FIELDS, MarginProjection, RunReport, WallClock, compute_deltas, emit_report, started_at
from .targets import closed_form_targets


class ExperimentWorkflow:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.spec = cfg.process_spec()
        self.levels = levels_from_tau_prime(cfg.tau_prime, cfg.n)
        self.rates = limiting_rates(self.spec, cfg.tau_prime)
        k = default_block_count(cfg.n) if cfg.blocks == "sqrt" else cfg.blocks
        self.scheme = partition_blocks(cfg.n, k)
        self.runner = ReplicateRunner(cfg.seed, cfg.num_workers)
        self.diagnostics = DiagnosticsWorkflow(cfg)

    def simulate(self):
        spec, levels, scheme = self.spec, self.levels, self.scheme

        def task(seed):
            path = generate_window(spec, self.cfg.n, seed)
            return summarize_window(mark_upcrossings(path, levels), mark_exceedances(path, levels), scheme)

        logger.info(f"Simulating {self.cfg.replicates} windows of {spec.name} (n={self.cfg.n}, k={scheme.k})")
        summaries = self.runner.run(task, self.cfg.replicates)
        logger.info("Simulation done!")
        return summaries

    def exact_rates(self):
        try:
            return exact_rates(self.spec, self.levels)
        except OracleBudgetError as e:
            logger.warning(f"Skipping exact rates: {e}")
            return None

    def run(self) -> RunReport:
        start = time.perf_counter()
        stamp = started_at()
        cfg, spec = self.cfg, self.spec
        logger.info(f"Experiment '{cfg.name}': process {spec.name} with lags {spec.to_dict()['lags']}")

        summaries = self.simulate()
        estimates = estimate_report(summaries, self.rates)

        multiplicity = multiplicity_histogram(s.blocks for s in summaries)
        cluster_sizes = cluster_size_histogram(s.union_blocks for s in summaries)
        marginal = [cluster_size_histogram(s.blocks[:, j] for s in summaries) for j in range(spec.d)]
        projections = []
        for j in range(spec.d):
            histogram, factor = project_multiplicity(multiplicity, j)
            projections.append(MarginProjection(margin=j + 1, factor=factor, histogram=histogram))

        decomposition = None
        gap = None
        eta_marginal = [e.value for e in estimates.eta_marginal]
        if spec.d >= 2 and all(eta is not None for eta in eta_marginal):
            decomposition = multiplicity_decomposition(multiplicity, marginal, self.rates.nu, eta_marginal)
            if estimates.eta_runs.defined:
                gap = combination_gap(estimates.eta_runs.value, eta_marginal, self.rates.nu)

        report = RunReport(
            config=cfg.model_dump(exclude=EXECUTION_FIELDS),
            process=spec.to_dict(),
            replicates=cfg.replicates,
            draws=cfg.replicates * (cfg.n + 1 + spec.max_lag - spec.min_lag),
            rates=self.rates,
            exact_rates=self.exact_rates(),
            estimates=estimates,
            multiplicity=multiplicity,
            cluster_sizes=cluster_sizes,
            marginal_cluster_sizes=marginal,
            projections=projections,
            decomposition=decomposition,
            combination_gap=gap,
            conditions=self.diagnostics.conditions() if cfg.n_grid else [],
            scaling=self.diagnostics.scaling() if cfg.scale else None,
            continuity=self.diagnostics.continuity() if cfg.epsilon_grid and spec.d >= 2 else None,
            targets=closed_form_targets(spec, cfg.tau_prime),
        )
        report.deltas = compute_deltas(report.observed(), report.targets)
        report.wall_clock = WallClock(
            started_at=stamp,
            elapsed_seconds=time.perf_counter() - start,
            num_workers=cfg.num_workers,
        )
        logger.info(f"Experiment '{cfg.name}' done in {report.wall_clock.elapsed_seconds:.1f}s")
        return report


def run_experiment(cfg: ExperimentConfig):
    """Run one experiment and write its report files; returns (report, written paths)."""
    report = ExperimentWorkflow(cfg).run()
    written = emit_report(report, cfg.formats, cfg.output_dir)
    return report, written
