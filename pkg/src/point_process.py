"""Upcrossing point processes, block partitions and cluster histograms."""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from pydantic import BaseModel

from .levels import LevelVector
from .process import SamplePath


@dataclass
class UpcrossingMarks:
    """marks[i-1, j] is the upcrossing indicator of margin j at index i = 1..n."""

    marks: np.ndarray
    union: np.ndarray

    @property
    def n(self) -> int:
        return self.marks.shape[0]

    @property
    def d(self) -> int:
        return self.marks.shape[1]

    @property
    def counts(self) -> np.ndarray:
        return self.marks.sum(axis=0)


def upcrossing_matrix(values: np.ndarray, u) -> np.ndarray:
    """X_i <= u < X_{i+1} for i = 1..n over the last two axes of a (..., n+1, d) array."""
    u = np.asarray(u, dtype=float)
    return (values[..., :-1, :] <= u) & (values[..., 1:, :] > u)


def exceedance_matrix(values: np.ndarray, u) -> np.ndarray:
    """X_i > u for i = 1..n."""
    return values[..., :-1, :] > np.asarray(u, dtype=float)


def _check_dimensions(path: SamplePath, levels: LevelVector):
    if levels.n != path.n:
        raise ValueError(f"levels.n: {levels.n} does not match path.n {path.n}")
    if levels.d != path.d:
        raise ValueError(f"levels.u: expected {path.d} levels, got {levels.d}")


def mark_upcrossings(path: SamplePath, levels: LevelVector) -> UpcrossingMarks:
    _check_dimensions(path, levels)
    marks = upcrossing_matrix(path.values, levels.u)
    return UpcrossingMarks(marks=marks, union=marks.any(axis=1))


def mark_exceedances(path: SamplePath, levels: LevelVector) -> np.ndarray:
    _check_dimensions(path, levels)
    return exceedance_matrix(path.values, levels.u)


@dataclass(frozen=True)
class BlockScheme:
    n: int
    k: int

    @property
    def r(self) -> int:
        return self.n // self.k

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """Full blocks as half-open index ranges (start, end]; C_1 = (0, r] = [1..r]."""
        return [((s - 1) * self.r, s * self.r) for s in range(1, self.k + 1)]

    @property
    def remainder(self) -> tuple[int, int]:
        return self.k * self.r, self.n


def default_block_count(n: int) -> int:
    return max(1, math.isqrt(n))


def partition_blocks(n: int, k: int) -> BlockScheme:
    if not 1 <= k <= n:
        raise ValueError(f"k: block count must lie in [1, {n}], got {k}")
    return BlockScheme(n=n, k=k)


@dataclass
class BlockCounts:
    full: np.ndarray  # (k, d)
    remainder: np.ndarray  # (d,)


def block_counts(marks: UpcrossingMarks, scheme: BlockScheme) -> BlockCounts:
    if scheme.n != marks.n:
        raise ValueError(f"scheme.n: {scheme.n} does not match marks.n {marks.n}")
    cut = scheme.k * scheme.r
    full = marks.marks[:cut].reshape(scheme.k, scheme.r, marks.d).sum(axis=1)
    return BlockCounts(full=full, remainder=marks.marks[cut:].sum(axis=0))


def union_block_counts(marks: UpcrossingMarks, scheme: BlockScheme) -> np.ndarray:
    if scheme.n != marks.n:
        raise ValueError(f"scheme.n: {scheme.n} does not match marks.n {marks.n}")
    cut = scheme.k * scheme.r
    return marks.union[:cut].reshape(scheme.k, scheme.r).sum(axis=1)


class HistogramRow(BaseModel):
    count_vector: tuple[int, ...]
    frequency: float
    block_count: int


class MultiplicityHistogram(BaseModel):
    """Empirical Pi_n over nonempty blocks; undefined when no block is nonempty."""

    rows: list[HistogramRow]
    nonempty_blocks: int
    total_blocks: int

    @property
    def defined(self) -> bool:
        return self.nonempty_blocks > 0

    @property
    def table(self) -> dict[tuple[int, ...], float]:
        return {row.count_vector: row.frequency for row in self.rows}

    def frequency(self, count_vector) -> float:
        return self.table.get(tuple(count_vector), 0.0)


class ClusterSizeHistogram(BaseModel):
    rows: list[HistogramRow]
    nonempty_blocks: int
    total_blocks: int
    total_events: int

    @property
    def defined(self) -> bool:
        return self.nonempty_blocks > 0

    @property
    def table(self) -> dict[int, float]:
        return {row.count_vector[0]: row.frequency for row in self.rows}

    @property
    def mean(self) -> float | None:
        if not self.defined:
            return None
        return self.total_events / self.nonempty_blocks

    def frequency(self, size: int) -> float:
        return self.table.get(size, 0.0)


def _rows(counter: Counter, nonempty: int) -> list[HistogramRow]:
    return [
        HistogramRow(count_vector=key, frequency=count / nonempty, block_count=count)
        for key, count in sorted(counter.items())
    ]


def multiplicity_histogram(block_vectors: Iterable[np.ndarray]) -> MultiplicityHistogram:
    """Pool (k, d) block count arrays across replicates, in the order given."""
    counter = Counter()
    total = 0
    for vectors in block_vectors:
        vectors = np.asarray(vectors, dtype=int)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        total += vectors.shape[0]
        nonempty = vectors[vectors.any(axis=1)]
        counter.update(tuple(int(c) for c in row) for row in nonempty)
    nonempty_blocks = sum(counter.values())
    return MultiplicityHistogram(
        rows=_rows(counter, nonempty_blocks) if nonempty_blocks else [],
        nonempty_blocks=nonempty_blocks,
        total_blocks=total,
    )


def cluster_size_histogram(union_counts: Iterable[np.ndarray]) -> ClusterSizeHistogram:
    """Pool per-block union counts across replicates."""
    counter = Counter()
    total = 0
    events = 0
    for counts in union_counts:
        counts = np.asarray(counts).ravel()
        total += counts.size
        nonempty = counts[counts > 0]
        events += int(nonempty.sum())
        counter.update((int(c),) for c in nonempty)
    nonempty_blocks = sum(counter.values())
    return ClusterSizeHistogram(
        rows=_rows(counter, nonempty_blocks) if nonempty_blocks else [],
        nonempty_blocks=nonempty_blocks,
        total_blocks=total,
        total_events=events,
    )


def project_multiplicity(hist: MultiplicityHistogram, j: int) -> tuple[ClusterSizeHistogram, float]:
    """Project Pi onto margin j: Pi_j = Pi*_j / (1 - Pi*_j(0)).

    Returns the projected histogram and the intensity factor 1 - Pi*_j(0).
    """
    counter = Counter()
    for row in hist.rows:
        if row.count_vector[j] > 0:
            counter[(row.count_vector[j],)] += row.block_count
    nonempty = sum(counter.values())
    events = sum(size[0] * count for size, count in counter.items())
    projected = ClusterSizeHistogram(
        rows=_rows(counter, nonempty) if nonempty else [],
        nonempty_blocks=nonempty,
        total_blocks=hist.total_blocks,
        total_events=events,
    )
    factor = nonempty / hist.nonempty_blocks if hist.defined else 0.0
    return projected, factor
