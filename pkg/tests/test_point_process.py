import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.levels import LevelVector
from src.point_process import (
    UpcrossingMarks,
    block_counts,
    cluster_size_histogram,
    default_block_count,
    exceedance_matrix,
    mark_upcrossings,
    multiplicity_histogram,
    partition_blocks,
    project_multiplicity,
    union_block_counts,
    upcrossing_matrix,
)
from src.process import ReplicateSeed, SamplePath


def _marks(columns) -> UpcrossingMarks:
    marks = np.asarray(columns, dtype=bool).T
    return UpcrossingMarks(marks=marks, union=marks.any(axis=1))


def test_upcrossings_and_exceedances_by_hand():
    values = np.array([[0.1], [0.9], [0.2], [0.95], [0.99]])
    np.testing.assert_array_equal(upcrossing_matrix(values, [0.5])[:, 0], [True, False, True, False])
    np.testing.assert_array_equal(exceedance_matrix(values, [0.5])[:, 0], [False, True, False, True])


def test_mark_upcrossings_checks_dimensions():
    path = SamplePath(n=4, values=np.zeros((5, 1)), seed=ReplicateSeed(0, 0))
    with pytest.raises(ValueError, match="levels.n"):
        mark_upcrossings(path, LevelVector(n=5, u=(0.5,)))
    with pytest.raises(ValueError, match="levels.u"):
        mark_upcrossings(path, LevelVector(n=4, u=(0.5, 0.5)))


def test_union_is_any_margin():
    values = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.1, 0.1]])
    path = SamplePath(n=3, values=values, seed=ReplicateSeed(0, 0))
    marks = mark_upcrossings(path, LevelVector(n=3, u=(0.5, 0.5)))
    np.testing.assert_array_equal(marks.union, [True, True, False])
    np.testing.assert_array_equal(marks.counts, [1, 1])


def test_partition_blocks():
    scheme = partition_blocks(10, 3)
    assert scheme.r == 3
    assert scheme.blocks == [(0, 3), (3, 6), (6, 9)]
    assert scheme.remainder == (9, 10)
    assert default_block_count(10_000) == 100


@pytest.mark.parametrize("k", [0, 11])
def test_partition_blocks_rejects_k(k):
    with pytest.raises(ValueError, match="k"):
        partition_blocks(10, k)


@given(st.integers(min_value=1, max_value=2000), st.data())
def test_blocks_tile_the_window(n, data):
    k = data.draw(st.integers(min_value=1, max_value=n))
    scheme = partition_blocks(n, k)
    blocks = scheme.blocks
    assert blocks[0][0] == 0
    assert all(prev[1] == cur[0] for prev, cur in zip(blocks, blocks[1:]))
    assert blocks[-1][1] == scheme.remainder[0]
    assert 0 <= scheme.remainder[1] - scheme.remainder[0] < k


def test_block_counts_drop_remainder():
    marks = _marks([[1, 0, 1, 0, 0, 1, 0, 1], [0, 0, 0, 1, 0, 0, 0, 0]])
    scheme = partition_blocks(8, 3)
    counts = block_counts(marks, scheme)
    np.testing.assert_array_equal(counts.full, [[1, 0], [1, 1], [1, 0]])
    np.testing.assert_array_equal(counts.remainder, [1, 0])
    np.testing.assert_array_equal(union_block_counts(marks, scheme), [1, 2, 1])


def test_multiplicity_histogram_by_hand():
    hist = multiplicity_histogram([np.array([[2, 0], [0, 0], [0, 1]]), np.array([[2, 1], [0, 1]])])
    assert hist.total_blocks == 5
    assert hist.nonempty_blocks == 4
    assert hist.frequency((0, 1)) == pytest.approx(0.5)
    assert hist.frequency([2, 0]) == pytest.approx(0.25)
    assert hist.frequency((3, 3)) == 0.0


def test_empty_histograms_are_undefined():
    hist = multiplicity_histogram([np.zeros((4, 2), dtype=int)])
    assert not hist.defined
    assert hist.rows == []
    sizes = cluster_size_histogram([np.zeros(4, dtype=int)])
    assert not sizes.defined
    assert sizes.mean is None


@given(arrays(np.int64, st.tuples(st.integers(1, 30), st.integers(1, 3)), elements=st.integers(0, 4)))
def test_histogram_mass_is_conserved(vectors):
    hist = multiplicity_histogram([vectors])
    nonempty = int(np.count_nonzero(vectors.any(axis=1)))
    assert hist.nonempty_blocks == nonempty
    assert sum(row.block_count for row in hist.rows) == nonempty
    if hist.defined:
        assert sum(row.frequency for row in hist.rows) == pytest.approx(1.0)


def test_cluster_size_histogram_mean():
    sizes = cluster_size_histogram([np.array([3, 0, 1]), np.array([0, 2])])
    assert sizes.nonempty_blocks == 3
    assert sizes.total_events == 6
    assert sizes.mean == pytest.approx(2.0)
    assert sizes.frequency(1) == pytest.approx(1 / 3)


def test_project_multiplicity():
    hist = multiplicity_histogram([np.array([[2, 0], [0, 1], [2, 1], [0, 1]])])
    first, factor = project_multiplicity(hist, 0)
    assert factor == pytest.approx(0.5)
    assert first.table == pytest.approx({2: 1.0})
    second, factor = project_multiplicity(hist, 1)
    assert factor == pytest.approx(0.75)
    assert second.frequency(1) == pytest.approx(1.0)
