"""Estimators of the upcrossings index, extremal index and related rates.

Every pooled ratio carries a delete-one-replicate jackknife standard error;
replicates are i.i.d. windows while indices inside a window are dependent.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel

from .levels import RateSummary
from .point_process import (
    BlockScheme,
    UpcrossingMarks,
    block_counts,
    union_block_counts,
)

UNDEFINED = "undefined"
OUT_OF_RANGE = "out_of_range"


class Estimate(BaseModel):
    value: Optional[float] = None
    std_error: Optional[float] = None
    event_count: int = 0
    flag: Optional[str] = None

    @property
    def defined(self) -> bool:
        return self.value is not None


def make_estimate(value, std_error, event_count: int, bounded: bool = True, name: str = "") -> Estimate:
    if value is None or not math.isfinite(value):
        if name:
            logger.warning(f"{name}: undefined with {event_count} events")
        return Estimate(event_count=int(event_count), flag=UNDEFINED)
    flag = None
    if bounded and not 0.0 <= value <= 1.0:
        flag = OUT_OF_RANGE
        if name:
            logger.warning(f"{name}: estimate {value:.4f} lies outside [0, 1]")
    if std_error is not None and not math.isfinite(std_error):
        std_error = None
    return Estimate(value=float(value), std_error=std_error, event_count=int(event_count), flag=flag)


def jackknife(columns: np.ndarray, statistic: Callable[[np.ndarray, int], Optional[float]]):
    """Value of `statistic(totals, replicates)` and its delete-one jackknife SE."""
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    replicates = columns.shape[0]
    totals = columns.sum(axis=0)
    value = statistic(totals, replicates)
    if value is None or replicates < 2:
        return value, None
    leave_one_out = []
    for row in columns:
        v = statistic(totals - row, replicates - 1)
        if v is not None and math.isfinite(v):
            leave_one_out.append(v)
    if len(leave_one_out) < 2:
        return value, None
    leave_one_out = np.asarray(leave_one_out)
    spread = np.sum((leave_one_out - leave_one_out.mean()) ** 2)
    return value, math.sqrt((replicates - 1) / replicates * spread)


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None


def _log_ratio(p: float, q: float) -> Optional[float]:
    if not 0 < p < 1 or not 0 < q < 1:
        return None
    return math.log(p) / math.log(q)


# per-window counts


def runs_counts(union: np.ndarray) -> tuple[int, int]:
    """(#{i <= n-2 : A_i, not A_{i+1}, not A_{i+2}}, #{i <= n-2 : A_i})."""
    a = np.asarray(union, dtype=bool)
    n = a.size
    if n < 3:
        return 0, 0
    head = a[: n - 2]
    quiet = head & ~a[1 : n - 1] & ~a[2:]
    return int(quiet.sum()), int(head.sum())


def marginal_runs_counts(column: np.ndarray) -> tuple[int, int]:
    """(#{i <= n-2 : A^j_i, not A^j_{i+2}}, #{i <= n-2 : A^j_i}); A^j_{i+1} is excluded automatically."""
    a = np.asarray(column, dtype=bool)
    n = a.size
    if n < 3:
        return 0, 0
    head = a[: n - 2]
    return int((head & ~a[2:]).sum()), int(head.sum())


@dataclass
class WindowSummary:
    """Count tuple of one window; the unit of every pooled reduction."""

    n: int
    runs: tuple[int, int]
    margin_runs: np.ndarray  # (d, 2)
    union_count: int
    margin_counts: np.ndarray  # (d,)
    exceed_any: int
    margin_exceed: np.ndarray  # (d,)
    no_exceedance: bool
    margin_no_exceedance: np.ndarray  # (d,)
    blocks: np.ndarray  # (k, d)
    union_blocks: np.ndarray  # (k,)

    @property
    def empty(self) -> bool:
        return self.union_count == 0


def summarize_window(marks: UpcrossingMarks, exceedances: np.ndarray, scheme: BlockScheme) -> WindowSummary:
    margin_runs = np.array([marginal_runs_counts(marks.marks[:, j]) for j in range(marks.d)], dtype=int)
    margin_exceed = exceedances.sum(axis=0)
    return WindowSummary(
        n=marks.n,
        runs=runs_counts(marks.union),
        margin_runs=margin_runs,
        union_count=int(marks.union.sum()),
        margin_counts=marks.counts,
        exceed_any=int(exceedances.any(axis=1).sum()),
        margin_exceed=margin_exceed,
        no_exceedance=not bool(exceedances.any()),
        margin_no_exceedance=margin_exceed == 0,
        blocks=block_counts(marks, scheme).full,
        union_blocks=union_block_counts(marks, scheme),
    )


# pooled estimators; each takes per-window count columns, one row per replicate


def _rows(values, width: int) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, width)


def _column(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1)


def _runs_estimate(columns: np.ndarray, name: str) -> Estimate:
    value, se = jackknife(columns, lambda t, r: _ratio(t[0], t[1]))
    return make_estimate(value, se, int(np.sum(columns[:, 1])), name=name)


def runs_estimator_multivariate(runs) -> Estimate:
    """Pooled runs estimate from the per-window `runs_counts` of the union marks."""
    return _runs_estimate(_rows(runs, 2), "eta_runs")


def runs_estimator_marginal(runs_j, name: str = "eta_marginal") -> Estimate:
    """Pooled runs estimate from the per-window `marginal_runs_counts` of one margin."""
    return _runs_estimate(_rows(runs_j, 2), name)


def combine_marginal(eta_marginal, nu) -> float:
    if len(eta_marginal) != len(nu):
        raise ValueError(f"nu: expected {len(eta_marginal)} rates, got {len(nu)}")
    for j, rate in enumerate(nu):
        if rate <= 0:
            raise ValueError(f"nu[{j}]: must be positive, got {rate}")
    return sum(rate * eta for rate, eta in zip(nu, eta_marginal)) / sum(nu)


def block_totals(union_blocks: np.ndarray) -> tuple[int, int]:
    """(nonempty blocks, union marks inside blocks) of one window."""
    counts = np.asarray(union_blocks)
    return int(np.count_nonzero(counts)), int(counts.sum())


def blocks_estimator(totals) -> Estimate:
    """Reciprocal of the pooled mean cluster size, from per-window `block_totals`."""
    columns = _rows(totals, 2)
    value, se = jackknife(columns, lambda t, r: _ratio(t[0], t[1]))
    return make_estimate(value, se, int(columns[:, 0].sum()), name="eta_blocks")


def phi_hat(union_counts) -> Estimate:
    """exp(-n P(A_1)); n P(A_1) is the mean number of union marks per window."""
    counts = _column(union_counts)
    value, se = jackknife(counts, lambda t, r: math.exp(-t[0] / r))
    return make_estimate(value, se, int(counts.sum()), name="phi_hat")


def eta_empty(empty_indicators, union_counts) -> Estimate:
    """log P(S_n([0,1]) = 0) / log phi_hat, phi_hat resampled with the indicators."""
    columns = np.column_stack([_column(empty_indicators), _column(union_counts)])
    value, se = jackknife(columns, lambda t, r: _log_ratio(t[0] / r, math.exp(-t[1] / r)))
    return make_estimate(value, se, int(columns[:, 0].sum()), name="eta_empty")


def theta_direct(no_exceedance_indicators, tau_union: Optional[float] = None, exceed_counts=None,
                 name: str = "theta_direct") -> Estimate:
    """log P(M_n <= u_n) / log Psi with Psi = exp(-tau_union).

    A closed-form `tau_union` is held fixed. Without one, tau_union is the mean
    per-window number of indices exceeding in some margin, resampled jointly.
    """
    below = _column(no_exceedance_indicators)
    if tau_union is not None:
        if tau_union <= 0:
            raise ValueError(f"tau_union: must be positive, got {tau_union}")
        psi = math.exp(-tau_union)
        value, se = jackknife(below, lambda t, r: _log_ratio(t[0] / r, psi))
    elif exceed_counts is not None:
        columns = np.column_stack([below, _column(exceed_counts)])
        value, se = jackknife(columns, lambda t, r: _log_ratio(t[0] / r, math.exp(-t[1] / r)))
    else:
        raise ValueError("tau_union: give a rate or per-window exceedance counts")
    return make_estimate(value, se, int(below.sum()), name=name)


def theta_from_eta(eta: float, nu_union: float, tau_union: float) -> float:
    """Invert eta = (tau_union / nu_union) * theta."""
    if tau_union <= 0:
        raise ValueError(f"tau_union: must be positive, got {tau_union}")
    if nu_union <= 0:
        raise ValueError(f"nu_union: must be positive, got {nu_union}")
    return eta * nu_union / tau_union


class EstimateReport(BaseModel):
    eta_runs: Estimate
    eta_marginal: list[Estimate]
    eta_combined: Estimate
    eta_blocks: Estimate
    eta_empty: Estimate
    theta_direct: Estimate
    theta_from_eta: Estimate
    theta_marginal: list[Estimate]
    theta_from_eta_marginal: list[Estimate]
    phi_hat: Estimate
    psi_hat: Estimate
    alpha_empty: Estimate
    alpha_blocks: Estimate
    nu_hat: list[Estimate]
    nu_union_hat: Estimate
    tau_hat: list[Estimate]
    tau_union_hat: Estimate

    def named(self) -> list[tuple[str, Estimate]]:
        """Flat (label, estimate) pairs with 1-based margin labels."""
        rows = []
        for name in type(self).model_fields:
            value = getattr(self, name)
            if isinstance(value, list):
                rows.extend((f"{name}_{j + 1}", estimate) for j, estimate in enumerate(value))
            else:
                rows.append((name, value))
        return rows


def _mean_estimate(column: np.ndarray, name: str) -> Estimate:
    column = np.asarray(column, dtype=float)
    value, se = jackknife(column, lambda t, r: t[0] / r)
    return make_estimate(value, se, int(column.sum()), bounded=False, name=name)


def estimate_report(summaries: list[WindowSummary], rates: RateSummary) -> EstimateReport:
    """All estimator routes from per-window summaries, pooled in replicate order."""
    if not summaries:
        raise ValueError("summaries: at least one window is required")
    d = len(rates.nu)
    nu = rates.nu

    runs = np.array([s.runs for s in summaries], dtype=float)
    margin_runs = np.stack([s.margin_runs for s in summaries]).astype(float)  # (R, d, 2)
    union_count = np.array([s.union_count for s in summaries], dtype=float)
    margin_counts = np.stack([s.margin_counts for s in summaries]).astype(float)
    exceed_any = np.array([s.exceed_any for s in summaries], dtype=float)
    margin_exceed = np.stack([s.margin_exceed for s in summaries]).astype(float)
    empty = np.array([s.empty for s in summaries], dtype=float)
    below = np.array([s.no_exceedance for s in summaries], dtype=float)
    margin_below = np.stack([s.margin_no_exceedance for s in summaries]).astype(float)
    blocks = np.array([block_totals(s.union_blocks) for s in summaries], dtype=float)

    eta_marginal = [runs_estimator_marginal(margin_runs[:, j, :], f"eta_marginal_{j + 1}") for j in range(d)]

    def combined(t, r):
        etas = [_ratio(t[2 * j], t[2 * j + 1]) for j in range(d)]
        if any(eta is None for eta in etas):
            return None
        return combine_marginal(etas, nu)

    value, se = jackknife(margin_runs.reshape(len(summaries), 2 * d), combined)
    eta_combined = make_estimate(value, se, int(margin_runs[:, :, 1].sum()), name="eta_combined")

    value, se = jackknife(empty, lambda t, r: -math.log(t[0] / r) if 0 < t[0] < r else None)
    alpha_empty = make_estimate(value, se, int(empty.sum()), bounded=False, name="alpha_empty")

    # closed-form union rates win over empirical ones when the process provides them
    def from_eta(t, r):
        eta = _ratio(t[0], t[1])
        nu_union = rates.nu_union if rates.nu_union is not None else t[2] / r
        tau_union = rates.tau_union if rates.tau_union is not None else t[3] / r
        if eta is None or nu_union <= 0 or tau_union <= 0:
            return None
        return theta_from_eta(eta, nu_union, tau_union)

    value, se = jackknife(np.column_stack([runs, union_count, exceed_any]), from_eta)
    theta_eta = make_estimate(value, se, int(runs[:, 1].sum()), name="theta_from_eta")

    value, se = jackknife(exceed_any, lambda t, r: math.exp(-t[0] / r))
    psi = make_estimate(value, se, int(exceed_any.sum()), name="psi_hat")

    theta_marginal = []
    theta_from_eta_marginal = []
    for j in range(d):
        tau_j = rates.tau[j]
        theta_marginal.append(theta_direct(margin_below[:, j], tau_j, name=f"theta_marginal_{j + 1}"))

        def from_eta_j(t, r, nu_j=nu[j], tau_j=tau_j):
            eta = _ratio(t[0], t[1])
            return None if eta is None else theta_from_eta(eta, nu_j, tau_j)

        value, se = jackknife(margin_runs[:, j, :], from_eta_j)
        theta_from_eta_marginal.append(
            make_estimate(value, se, int(margin_runs[:, j, 1].sum()), name=f"theta_from_eta_marginal_{j + 1}")
        )

    return EstimateReport(
        eta_runs=runs_estimator_multivariate(runs),
        eta_marginal=eta_marginal,
        eta_combined=eta_combined,
        eta_blocks=blocks_estimator(blocks),
        eta_empty=eta_empty(empty, union_count),
        theta_direct=theta_direct(below, rates.tau_union, exceed_counts=exceed_any),
        theta_from_eta=theta_eta,
        theta_marginal=theta_marginal,
        theta_from_eta_marginal=theta_from_eta_marginal,
        phi_hat=phi_hat(union_count),
        psi_hat=psi,
        alpha_empty=alpha_empty,
        alpha_blocks=_mean_estimate(blocks[:, 0], "alpha_blocks"),
        nu_hat=[_mean_estimate(margin_counts[:, j], f"nu_hat_{j + 1}") for j in range(d)],
        nu_union_hat=_mean_estimate(union_count, "nu_union_hat"),
        tau_hat=[_mean_estimate(margin_exceed[:, j], f"tau_hat_{j + 1}") for j in range(d)],
        tau_union_hat=_mean_estimate(exceed_any, "tau_union_hat"),
    )
