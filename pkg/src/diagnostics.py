"""Finite-n statistics for the side conditions and structural properties.

The conditions are limits, so statistics are reported along an n grid (or
an epsilon grid) with a trend hint: "vanishing" when the last value is below
half the first, "stabilizing" otherwise.
"""

from typing import Callable, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel

from .estimators import combine_marginal, runs_counts
from .levels import LevelVector, levels_from_tau_prime, scaled_levels, tau_prime_for_nu
from .point_process import (
    ClusterSizeHistogram,
    MultiplicityHistogram,
    UpcrossingMarks,
    cluster_size_histogram,
    default_block_count,
    exceedance_matrix,
    mark_upcrossings,
    partition_blocks,
    union_block_counts,
)
from .process import ProcessSpec, generate_window
from .replicates import ReplicateRunner

VANISHING = "vanishing"
STABILIZING = "stabilizing"
DIRECTIONS = ("both", "forward")


class ConditionEntry(BaseModel):
    n: int
    k: int
    value: float
    std_error: float
    replicates: int
    first_term: Optional[float] = None
    first_term_std_error: Optional[float] = None


class ConditionReport(BaseModel):
    statistic: str
    grid_kind: str = "n"
    grid: list[float]
    values: list[float]
    std_errors: list[float]
    hint: str
    first_terms: Optional[list[float]] = None


class ScalingReport(BaseModel):
    c: float
    base_rate: float
    scaled_rate: float
    ratio: Optional[float]
    tv_distance: Optional[float]
    base_histogram: ClusterSizeHistogram
    scaled_histogram: ClusterSizeHistogram


class ContinuityReport(BaseModel):
    drop_margin: int
    epsilon_grid: list[float]
    values: list[Optional[float]]
    subvector_value: Optional[float]
    gap: Optional[float]


class ShiftReport(BaseModel):
    shift: int
    first: float
    shifted: float
    std_error: float

    @property
    def difference(self) -> float:
        return self.first - self.shifted


class DecompositionReport(BaseModel):
    multi_margin_mass: float
    max_deviation: float
    rows: list[dict]


def trend_hint(values) -> str:
    first, last = values[0], values[-1]
    if first <= 0:
        return VANISHING if last <= 0 else STABILIZING
    return VANISHING if last < first / 2 else STABILIZING


def _simulate(spec: ProcessSpec, levels: LevelVector, n: int, replicates: int, runner: ReplicateRunner,
              reduce: Callable[[UpcrossingMarks], object]) -> list:
    def task(seed):
        return reduce(mark_upcrossings(generate_window(spec, n, seed), levels))

    return runner.run(task, replicates)


def _mean_and_se(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def _block_count(n: int, k) -> int:
    return default_block_count(n) if k in (None, "sqrt") else int(k)


def pair_statistic(marks: np.ndarray, m: int, directions: str = "forward") -> tuple[float, float]:
    """Per-window estimate of the H-sum over margin pairs and its same-index term.

    For margins j < j' the sum runs over n P(A^j_1, A^j'_i), i = 1..m; with
    directions="both" the reversed order n P(A^j'_1, A^j_i), i = 2..m, is added.
    Pair frequencies at lag h are averaged over the n - h start positions.
    """
    if directions not in DIRECTIONS:
        raise ValueError(f"directions: expected one of {DIRECTIONS}, got '{directions}'")
    n, d = marks.shape
    total = 0.0
    first = 0.0
    positions = [np.flatnonzero(marks[:, j]) for j in range(d)]
    for j in range(d):
        for jj in range(j + 1, d):
            p, q = positions[j], positions[jj]
            if p.size == 0 or q.size == 0:
                continue
            lag = (q[None, :] - p[:, None]).ravel()
            forward = lag[(lag >= 0) & (lag < m)]
            total += float(np.sum(n / (n - forward)))
            first += float(np.count_nonzero(forward == 0))
            if directions == "both":
                backward = -lag[(lag < 0) & (lag > -m)]
                total += float(np.sum(n / (n - backward)))
    return total, first


def h_sum(spec: ProcessSpec, tau_prime, n: int, k=None, replicates: int = 200, master_seed: int = 0,
          num_workers: int = 4, terms: Optional[int] = None, directions: str = "forward") -> ConditionEntry:
    """Monte Carlo H-sum; `terms` caps the inner sum (3 gives the finite-term version).

    directions="both" also counts pairs where the higher-numbered margin comes first.
    """
    if spec.d < 2:
        raise ValueError(f"spec.d: H-sum needs at least two margins, got {spec.d}")
    k = _block_count(n, k)
    m = partition_blocks(n, k).r
    if terms is not None:
        m = min(m, terms)
    levels = levels_from_tau_prime(tau_prime, n)
    runner = ReplicateRunner(master_seed, num_workers)
    per_window = _simulate(spec, levels, n, replicates, runner, lambda marks: pair_statistic(marks.marks, m, directions))
    value, se = _mean_and_se([v for v, _ in per_window])
    first, first_se = _mean_and_se([f for _, f in per_window])
    logger.info(f"H-sum {spec.name} n={n} k={k}: {value:.4f} (first term {first:.4f})")
    return ConditionEntry(n=n, k=k, value=value, std_error=se, replicates=replicates,
                          first_term=first, first_term_std_error=first_se)


def oscillation_count(indicator: np.ndarray, m: int) -> int:
    """#{p <= n-m+1 : A_p, not A_{p+1}, not A_{p+2}, A_i for some i in [p+3, p+m-1]}."""
    n = indicator.size
    positions = np.flatnonzero(indicator)
    if positions.size < 2:
        return 0
    current, gap = positions[:-1], np.diff(positions)
    return int(np.count_nonzero((current <= n - m) & (gap >= 3) & (gap <= m - 1)))


def local_osc_stat(spec: ProcessSpec, tau_prime, n: int, k=None, replicates: int = 200, master_seed: int = 0,
                   num_workers: int = 4, margin: Optional[int] = None) -> ConditionEntry:
    """n P(A_1, not A_2, not A_3, some A_i with 4 <= i <= n/k); per margin when `margin` is set."""
    k = _block_count(n, k)
    m = partition_blocks(n, k).r
    if m < 5:
        raise ValueError(f"k: block length n/k = {m} is below 5")
    levels = levels_from_tau_prime(tau_prime, n)
    runner = ReplicateRunner(master_seed, num_workers)

    def reduce(marks: UpcrossingMarks):
        indicator = marks.union if margin is None else marks.marks[:, margin]
        return oscillation_count(indicator, m) * n / (n - m + 1)

    value, se = _mean_and_se(_simulate(spec, levels, n, replicates, runner, reduce))
    return ConditionEntry(n=n, k=k, value=value, std_error=se, replicates=replicates)


def condition_trend(statistic: str, entries: list[ConditionEntry]) -> ConditionReport:
    grid = [entry.n for entry in entries]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"n_grid: must be strictly increasing, got {grid}")
    values = [max(entry.value, 0.0) for entry in entries]
    first_terms = None
    if all(entry.first_term is not None for entry in entries):
        first_terms = [entry.first_term for entry in entries]
    return ConditionReport(
        statistic=statistic,
        grid=grid,
        values=values,
        std_errors=[entry.std_error for entry in entries],
        hint=trend_hint(values),
        first_terms=first_terms,
    )


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(key, 0.0) - q.get(key, 0.0)) for key in keys)


def scaling_check(spec: ProcessSpec, tau_prime, n: int, c: float, replicates: int = 200, k=None,
                  master_seed: int = 0, num_workers: int = 4) -> ScalingReport:
    """Cluster rate and cluster-size law under levels calibrated for floor(n/c).

    Both level vectors are applied to the same simulated windows.
    """
    if c <= 0:
        raise ValueError(f"c: scaling constant must be positive, got {c}")
    base = levels_from_tau_prime(tau_prime, n)
    scaled = scaled_levels(spec, tau_prime, n, c)
    scheme = partition_blocks(n, _block_count(n, k))
    runner = ReplicateRunner(master_seed, num_workers)

    def task(seed):
        path = generate_window(spec, n, seed)
        return (
            union_block_counts(mark_upcrossings(path, base), scheme),
            union_block_counts(mark_upcrossings(path, scaled), scheme),
        )

    results = runner.run(task, replicates)
    base_hist = cluster_size_histogram(b for b, _ in results)
    scaled_hist = cluster_size_histogram(s for _, s in results)
    base_rate = base_hist.nonempty_blocks / replicates
    scaled_rate = scaled_hist.nonempty_blocks / replicates
    ratio = scaled_rate / base_rate if base_rate > 0 else None
    tv = None
    if base_hist.defined and scaled_hist.defined:
        tv = total_variation(base_hist.table, scaled_hist.table)
    logger.info(f"Scaling c={c}: rate ratio {ratio}, TV {tv}")
    return ScalingReport(c=c, base_rate=base_rate, scaled_rate=scaled_rate, ratio=ratio, tv_distance=tv,
                         base_histogram=base_hist, scaled_histogram=scaled_hist)


def _runs_ratio(counts) -> Optional[float]:
    counts = np.asarray(counts, dtype=float).reshape(-1, 2).sum(axis=0)
    return counts[0] / counts[1] if counts[1] > 0 else None


def continuity_check(spec: ProcessSpec, nu_prime, epsilon_grid, n: int, replicates: int = 200,
                     drop_margin: Optional[int] = None, master_seed: int = 0,
                     num_workers: int = 4) -> ContinuityReport:
    """Runs estimate of eta(nu) as nu[drop_margin] = epsilon shrinks, against the subvector index.

    `nu_prime` lists the rates of the kept margins in order.
    """
    drop = spec.d - 1 if drop_margin is None else drop_margin
    if not 0 <= drop < spec.d:
        raise ValueError(f"drop_margin: must lie in [0, {spec.d - 1}], got {drop}")
    if len(nu_prime) != spec.d - 1:
        raise ValueError(f"nu_prime: expected {spec.d - 1} rates, got {len(nu_prime)}")
    grid = [float(e) for e in epsilon_grid]
    if not grid or any(e <= 0 for e in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"epsilon_grid: must be positive and strictly decreasing, got {grid}")
    kept = [j for j in range(spec.d) if j != drop]
    runner = ReplicateRunner(master_seed, num_workers)

    values = []
    subvector = None
    for epsilon in grid:
        nu = list(nu_prime)
        nu.insert(drop, epsilon)
        levels = levels_from_tau_prime(tau_prime_for_nu(spec, nu), n)

        def reduce(marks: UpcrossingMarks):
            return runs_counts(marks.union), runs_counts(marks.marks[:, kept].any(axis=1))

        results = _simulate(spec, levels, n, replicates, runner, reduce)
        values.append(_runs_ratio([full for full, _ in results]))
        # kept margins' levels do not depend on epsilon
        subvector = _runs_ratio([sub for _, sub in results])
        logger.debug(f"Continuity epsilon={epsilon}: eta={values[-1]}")

    gap = None
    if values[-1] is not None and subvector is not None:
        gap = abs(values[-1] - subvector)
    return ContinuityReport(drop_margin=drop, epsilon_grid=grid, values=values, subvector_value=subvector, gap=gap)


def multiplicity_decomposition(hist: MultiplicityHistogram, marginal_hists: list[ClusterSizeHistogram],
                               nu, eta_marginal) -> DecompositionReport:
    """Pi(y e_j) against nu_j eta_j / sum(nu eta) * Pi_j(y), and mass on multi-margin vectors."""
    d = len(marginal_hists)
    weights = [rate * eta for rate, eta in zip(nu, eta_marginal)]
    total = sum(weights)
    multi = sum(row.frequency for row in hist.rows if sum(1 for c in row.count_vector if c > 0) >= 2)
    rows = []
    deviation = 0.0
    for j in range(d):
        for size, frequency in marginal_hists[j].table.items():
            vector = [0] * d
            vector[j] = size
            predicted = weights[j] / total * frequency if total > 0 else 0.0
            observed = hist.frequency(vector)
            deviation = max(deviation, abs(observed - predicted))
            rows.append({"margin": j + 1, "size": int(size), "observed": float(observed), "predicted": float(predicted)})
    return DecompositionReport(multi_margin_mass=float(multi), max_deviation=float(deviation), rows=rows)


def combination_gap(eta_runs: float, eta_marginal, nu) -> float:
    """|combine_marginal - eta_runs|; large values flag a failure of cross-margin independence."""
    return abs(combine_marginal(eta_marginal, nu) - eta_runs)


def shift_invariance(spec: ProcessSpec, levels: LevelVector, n: int, shift: int, replicates: int = 200,
                     master_seed: int = 0, num_workers: int = 4) -> ShiftReport:
    """Joint exceedance frequency of (i, i+1) at i = 1 and at i = 1 + shift, with the SE of their difference."""
    if not 1 <= shift <= n - 2:
        raise ValueError(f"shift: must lie in [1, {n - 2}], got {shift}")
    runner = ReplicateRunner(master_seed, num_workers)

    def task(seed):
        exceed = exceedance_matrix(generate_window(spec, n, seed).values, levels.u)
        joint = exceed[:-1] & exceed[1:]
        return float(joint[0].any()), float(joint[shift].any())

    results = np.asarray(runner.run(task, replicates))
    difference = results[:, 0] - results[:, 1]
    se = float(difference.std(ddof=1) / np.sqrt(replicates)) if replicates > 1 else 0.0
    report = ShiftReport(shift=shift, first=float(results[:, 0].mean()), shifted=float(results[:, 1].mean()),
                         std_error=se)
    logger.info(f"Shift {shift}: joint exceedance {report.first:.4f} vs {report.shifted:.4f} (SE {se:.4f})")
    return report
