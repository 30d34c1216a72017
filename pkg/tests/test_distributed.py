import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastp2o.block_operator import SpaceTimeVector, apply_adjoint, apply_forward, setup
from fastp2o.counters import apply_flops
from fastp2o.distributed import (
    comm_report,
    distributed_adjoint,
    distributed_forward,
    gather,
    partition_operator,
    scatter_data,
    scatter_param,
    split_ranges,
)
from fastp2o.errors import DimensionError, EmptyShardError, OrderingError
from fastp2o.planner import CostParams, GridShape

from conftest import max_rel, random_compact

GRIDS = ["1x1", "1x4", "2x2", "4x1", "2x3"]


def vectors(rng, n_d, n_m, n_t):
    m = SpaceTimeVector.from_soti(rng.standard_normal((n_m, n_t)))
    d = SpaceTimeVector.from_soti(rng.standard_normal((n_d, n_t)))
    return m, d


# --- partitioning --------------------------------------------------------

def test_split_even_and_ragged():
    assert split_ranges(4, 2) == [(0, 2), (2, 4)]
    assert split_ranges(5, 2) == [(0, 3), (3, 5)]
    assert split_ranges(7, 3) == [(0, 3), (3, 6), (6, 7)]


def test_split_never_leaves_empty_worker():
    # ceil(5/4) = 2 would give 2,2,1,0
    assert split_ranges(5, 4) == [(0, 2), (2, 3), (3, 4), (4, 5)]


def test_split_rejects_more_parts_than_items():
    with pytest.raises(EmptyShardError):
        split_ranges(3, 4)


@given(n=st.integers(1, 500), parts=st.integers(1, 50))
def test_split_tiles_range(n, parts):
    if parts > n:
        with pytest.raises(EmptyShardError):
            split_ranges(n, parts)
        return
    ranges = split_ranges(n, parts)
    assert len(ranges) == parts
    assert ranges[0][0] == 0 and ranges[-1][1] == n
    assert all(a < b for a, b in ranges)
    assert all(ranges[k][1] == ranges[k + 1][0] for k in range(parts - 1))


def test_partition_single_worker_is_whole_operator(rng):
    compact = random_compact(rng, 3, 4, 8)
    part = partition_operator(compact, GridShape(1, 1))
    np.testing.assert_array_equal(part.shard(0, 0).freq_blocks, setup(compact).freq_blocks)


def test_partition_ragged_rows(rng):
    compact = random_compact(rng, 5, 3, 4)
    part = partition_operator(compact, GridShape(2, 1))
    assert part.row_ranges == [(0, 3), (3, 5)]
    assert part.shard(0, 0).n_d == 3 and part.shard(1, 0).n_d == 2


def test_partition_reassembles_global_operator(rng):
    compact = random_compact(rng, 5, 7, 6)
    spec = setup(compact)
    for grid in GRIDS:
        part = partition_operator(compact, GridShape.parse(grid))
        rebuilt = np.zeros_like(spec.freq_blocks)
        for (i, j), w in part.workers.items():
            (r0, r1), (c0, c1) = part.row_ranges[i], part.col_ranges[j]
            rebuilt[:, r0:r1, c0:c1] = w.shard.freq_blocks
        assert max_rel(rebuilt, spec.freq_blocks) < 1e-13


def test_partition_from_spectral_matches_compact(rng):
    compact = random_compact(rng, 5, 7, 6)
    a = partition_operator(compact, GridShape(2, 3))
    b = partition_operator(setup(compact), GridShape(2, 3))
    for key in a.workers:
        np.testing.assert_allclose(a.shard(*key).freq_blocks, b.shard(*key).freq_blocks, atol=1e-13)


def test_partition_rejects_empty_shards(rng):
    compact = random_compact(rng, 3, 2, 4)
    with pytest.raises(EmptyShardError):
        partition_operator(compact, GridShape(4, 1))
    with pytest.raises(EmptyShardError):
        partition_operator(compact, GridShape(1, 3))


# --- scatter / gather ----------------------------------------------------

def test_scatter_param_slices(rng):
    part = partition_operator(random_compact(rng, 2, 4, 3), GridShape(1, 2))
    m = SpaceTimeVector.from_soti(np.arange(12.0).reshape(4, 3))
    a, b = scatter_param(m, part)
    np.testing.assert_array_equal(a, [[0, 1, 2], [3, 4, 5]])
    np.testing.assert_array_equal(b, [[6, 7, 8], [9, 10, 11]])


def test_scatter_ragged_and_gather_round_trip(rng):
    part = partition_operator(random_compact(rng, 3, 5, 4), GridShape(1, 2))
    m = SpaceTimeVector.from_soti(rng.standard_normal((5, 4)))
    slices = scatter_param(m, part)
    assert [s.shape[0] for s in slices] == [3, 2]
    np.testing.assert_array_equal(gather(slices).values, m.values)


def test_scatter_data_round_trip(rng):
    part = partition_operator(random_compact(rng, 5, 2, 4), GridShape(2, 1))
    d = SpaceTimeVector.from_soti(rng.standard_normal((5, 4)))
    np.testing.assert_array_equal(gather(scatter_data(d, part)).values, d.values)


def test_scatter_checks_ordering_and_size(rng):
    part = partition_operator(random_compact(rng, 2, 4, 3), GridShape(1, 2))
    m = SpaceTimeVector.from_soti(rng.standard_normal((4, 3)))
    with pytest.raises(OrderingError):
        scatter_param(m.to(1 - m.ordering), part)
    with pytest.raises(DimensionError):
        scatter_param(SpaceTimeVector.from_soti(np.zeros((3, 3))), part)


# --- distributed matvecs -------------------------------------------------

def test_one_by_one_is_serial_result(rng):
    compact = random_compact(rng, 3, 4, 8)
    spec = setup(compact)
    m, d = vectors(rng, 3, 4, 8)
    part = partition_operator(compact, GridShape(1, 1))
    np.testing.assert_array_equal(distributed_forward(part, m).vector.values, apply_forward(spec, m).values)
    np.testing.assert_array_equal(distributed_adjoint(part, d).vector.values, apply_adjoint(spec, d).values)


def test_one_row_grid(rng):
    compact = random_compact(rng, 3, 8, 16)
    spec = setup(compact)
    m, d = vectors(rng, 3, 8, 16)
    part = partition_operator(compact, GridShape(1, 4))
    assert max_rel(distributed_forward(part, m).vector.values, apply_forward(spec, m).values) < 1e-12
    assert max_rel(distributed_adjoint(part, d).vector.values, apply_adjoint(spec, d).values) < 1e-12


@pytest.mark.parametrize("grid", GRIDS)
def test_ragged_grids_match_serial(rng, grid):
    compact = random_compact(rng, 5, 7, 32)
    spec = setup(compact)
    m, d = vectors(rng, 5, 7, 32)
    part = partition_operator(compact, GridShape.parse(grid))
    assert max_rel(distributed_forward(part, m).vector.values, apply_forward(spec, m).values) < 1e-12
    assert max_rel(distributed_adjoint(part, d).vector.values, apply_adjoint(spec, d).values) < 1e-12


@settings(max_examples=25, deadline=None)
@given(n_d=st.integers(1, 6), n_m=st.integers(1, 6), n_t=st.integers(1, 16),
       r=st.integers(1, 6), c=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_any_valid_grid_matches_serial(n_d, n_m, n_t, r, c, seed):
    rng = np.random.default_rng(seed)
    compact = random_compact(rng, n_d, n_m, n_t)
    if r > n_d or c > n_m:
        with pytest.raises(EmptyShardError):
            partition_operator(compact, GridShape(r, c))
        return
    spec = setup(compact)
    m, d = vectors(rng, n_d, n_m, n_t)
    part = partition_operator(compact, GridShape(r, c))
    assert max_rel(distributed_forward(part, m).vector.values, apply_forward(spec, m).values) < 1e-11
    assert max_rel(distributed_adjoint(part, d).vector.values, apply_adjoint(spec, d).values) < 1e-11


def test_threads_and_serial_are_bit_identical(rng):
    compact = random_compact(rng, 6, 9, 16)
    m, d = vectors(rng, 6, 9, 16)
    part = partition_operator(compact, GridShape(3, 3))
    serial = distributed_forward(part, m).vector.values
    for _ in range(3):
        np.testing.assert_array_equal(distributed_forward(part, m, threads=4).vector.values, serial)
    serial = distributed_adjoint(part, d).vector.values
    np.testing.assert_array_equal(distributed_adjoint(part, d, threads=4).vector.values, serial)


# --- communication accounting --------------------------------------------

def phases(log):
    return {ph.name: ph for ph in log.phases}


def test_single_worker_has_no_communication(rng):
    part = partition_operator(random_compact(rng, 2, 3, 4), GridShape(1, 1))
    m, _ = vectors(rng, 2, 3, 4)
    res = distributed_forward(part, m)
    assert res.log.total_bytes == 0 and res.log.total_messages == 0
    assert comm_report(res.log, CostParams())["total"]["modeled_seconds"] == 0.0


def test_one_row_reduce_bytes_per_link(rng):
    n_d, n_m, n_t, c = 3, 8, 16, 4
    part = partition_operator(random_compact(rng, n_d, n_m, n_t), GridShape(1, c))
    m, _ = vectors(rng, n_d, n_m, n_t)
    ph = phases(distributed_forward(part, m).log)
    assert ph["broadcast"].bytes == 0
    assert set(ph["reduce"].link_bytes) == {8 * n_t * n_d}
    assert ph["reduce"].messages == c - 1
    assert ph["reduce"].rounds == 2


@pytest.mark.parametrize("r,c", [(2, 2), (2, 4), (4, 2), (3, 3)])
def test_even_partition_bytes_match_formulas(rng, r, c):
    N_d, N_m, n_t = 2 * r, 3 * c, 8
    n_d, n_m = N_d // r, N_m // c
    part = partition_operator(random_compact(rng, N_d, N_m, n_t), GridShape(r, c))
    m, d = vectors(rng, N_d, N_m, n_t)
    fwd = phases(distributed_forward(part, m).log)
    assert fwd["broadcast"].bytes == c * (r - 1) * 8 * n_t * n_m
    assert fwd["reduce"].bytes == r * (c - 1) * 8 * n_t * n_d
    adj = phases(distributed_adjoint(part, d).log)
    assert adj["broadcast"].bytes == r * (c - 1) * 8 * n_t * n_d
    assert adj["reduce"].bytes == c * (r - 1) * 8 * n_t * n_m


def test_two_by_two_ragged_hand_count(rng):
    # N_d=5 -> rows of 3, 2 sensors; N_m=7 -> columns of 4, 3 sources
    part = partition_operator(random_compact(rng, 5, 7, 10), GridShape(2, 2))
    m, _ = vectors(rng, 5, 7, 10)
    log = distributed_forward(part, m).log
    ph = phases(log)
    assert ph["broadcast"].bytes == 8 * 10 * (4 + 3)
    assert ph["reduce"].bytes == 8 * 10 * (3 + 2)
    assert log.total_bytes == 8 * 10 * 12
    rep = comm_report(log, CostParams(latency=1e-6, bandwidth=1e9))
    assert rep["broadcast"]["modeled_seconds"] == pytest.approx(1e-6 + 320 / 1e9)
    assert rep["total"]["bytes"] == 960


def test_worker_isolation(rng):
    compact = random_compact(rng, 4, 6, 8)
    part = partition_operator(compact, GridShape(2, 3))
    m, _ = vectors(rng, 4, 6, 8)
    distributed_forward(part, m)
    shards = [w.shard.freq_blocks for w in part.workers.values()]
    for a in range(len(shards)):
        assert not shards[a].flags.writeable
        for b in range(a + 1, len(shards)):
            assert not np.shares_memory(shards[a], shards[b])
    for (i, j), w in part.workers.items():
        assert not w.inbox
        # each worker saw exactly one local apply on its own shard size
        assert w.counter.stages["apply"].flops == apply_flops(w.shard.n_d, w.shard.n_m, 2 * 8)
        # row 1 gets one broadcast; column 0 collects both reduce partners
        assert w.received == (1 if i == 1 else 0) + (2 if j == 0 else 0)
        assert w.sent == (1 if i == 0 else 0) + (1 if j > 0 else 0)
