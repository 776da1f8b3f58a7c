import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggrhawkes.aggregate import (
    AggregatedCounts,
    AggregationError,
    BinSpec,
    ProcessBins,
    aggregate,
    is_consistent,
)
from aggrhawkes.process import EventPattern, ModelParams
from aggrhawkes.simulate import simulate_hawkes


def test_temporal_counts():
    pat = EventPattern([0.2, 0.7, 1.4], 2.0)
    c = aggregate(pat, BinSpec.uniform(1.0, 2.0))
    assert c.counts[0].tolist() == [2, 1]
    assert c.n == 3


def test_empty_pattern():
    c = aggregate(EventPattern([], 3.0), BinSpec.uniform(1.0, 3.0))
    assert c.counts[0].tolist() == [0, 0, 0]


def test_spatial_cells():
    eps = 1e-9
    pat = EventPattern([0.5, 0.5 + eps], 1.0, s=[[0.1, 0.1], [0.9, 0.9]], window=(0, 1, 0, 1))
    c = aggregate(pat, BinSpec.uniform(1.0, 1.0, ds=0.5, window=(0, 1, 0, 1)))
    assert c.counts[0].shape == (1, 2, 2)
    assert c.counts[0][0, 0, 0] == 1 and c.counts[0][0, 1, 1] == 1 and c.n == 2


def test_ragged_final_bin():
    spec = BinSpec.uniform(1.5, 4.0)
    np.testing.assert_allclose(spec.time_edges(0), [0, 1.5, 3.0, 4.0])
    c = aggregate(EventPattern([3.9], 4.0), spec)
    assert c.counts[0].tolist() == [0, 0, 1]


def test_half_open_edges():
    spec = BinSpec.uniform(1.0, 3.0)
    assert aggregate(EventPattern([1.0], 3.0), spec).counts[0].tolist() == [0, 1, 0]


def test_outside_event_named():
    spec = BinSpec.uniform(1.0, 2.0, ds=1.0, window=(0, 2, 0, 2))
    pat = EventPattern([0.5, 1.5], 2.0, s=[[1, 1], [3, 1]], window=(0, 4, 0, 4))
    with pytest.raises(AggregationError, match="event 1"):
        aggregate(pat, spec)


def test_consistency_and_bin_crossing():
    pat = EventPattern([0.2, 0.7, 1.4], 2.0)
    spec = BinSpec.uniform(1.0, 2.0)
    counts = aggregate(pat, spec)
    assert is_consistent(pat, counts)
    assert not is_consistent(EventPattern([0.2, 1.1, 1.4], 2.0), counts)


def test_alternative_patterns_match_same_counts():
    # 4 time bins x 3 spatial cells (one-dimensional space as a 3 x 1 strip)
    window = (0.0, 1.0, 0.0, 3.0)
    spec = BinSpec((ProcessBins(1.0, 1.0),), 4.0, window)
    a = EventPattern([0.2, 0.6, 1.3, 2.5, 2.9, 3.1], 4.0,
                     s=[[0.5, 0.2], [0.5, 2.5], [0.5, 1.1], [0.5, 0.7], [0.5, 0.9], [0.5, 2.2]],
                     window=window)
    b = EventPattern([0.8, 0.1, 1.9, 2.05, 2.4, 3.8], 4.0,
                     s=[[0.1, 0.9], [0.9, 2.1], [0.3, 1.8], [0.2, 0.1], [0.6, 0.4], [0.4, 2.9]],
                     window=window)
    counts = aggregate(a, spec)
    assert counts.counts[0].shape == (4, 1, 3)
    assert is_consistent(a, counts) and is_consistent(b, counts)
    assert not np.allclose(a.t, b.t)
    temporal = aggregate(a.drop_space(), BinSpec.uniform(1.0, 4.0))
    assert is_consistent(b.drop_space(), temporal)


def test_per_process_specs():
    pat = EventPattern([0.5, 0.6, 2.5], 3.0, [0, 1, 1], n_processes=2)
    spec = BinSpec((ProcessBins(1.0), ProcessBins(3.0)), 3.0)
    c = aggregate(pat, spec)
    assert c.counts[0].tolist() == [1, 0, 0]
    assert c.counts[1].tolist() == [2]
    np.testing.assert_array_equal(c.totals, pat.counts_by_process())


def test_binspec_dict_round_trip():
    spec = BinSpec.uniform(0.5, 10.0, ds=2.0, window=(0, 4, 0, 6), n_processes=2)
    assert BinSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError, match="unknown"):
        BinSpec.from_dict({**spec.to_dict(), "typo": 1})


def test_counts_shape_validation():
    spec = BinSpec.uniform(1.0, 3.0)
    with pytest.raises(ValueError, match="shape"):
        AggregatedCounts((np.zeros(2, dtype=int),), spec)
    with pytest.raises(ValueError):
        AggregatedCounts((np.array([1, -1, 0]),), spec)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), dt=st.sampled_from([0.25, 0.5, 1.0, 1.5]),
       spatial=st.booleans())
def test_round_trip_conservation_refinement(seed, dt, spatial):
    window = (0.0, 20.0, 0.0, 20.0)
    params = ModelParams.exponential([0.5], [[0.5]], [[1.0]], [[1.0]] if spatial else None)
    pat, _ = simulate_hawkes(params, 30.0, window if spatial else None, seed=seed)
    if spatial:
        x, y = pat.s[:, 0], pat.s[:, 1]
        pat = pat.subset((x >= 0) & (x < 20) & (y >= 0) & (y < 20))
    ds = 2.0 if spatial else None
    spec = BinSpec.uniform(dt, 30.0, ds, window if spatial else None)
    counts = aggregate(pat, spec)
    assert is_consistent(pat, counts)
    assert counts.n == pat.n
    fine = aggregate(pat, BinSpec.uniform(dt / 2, 30.0, ds, window if spatial else None))
    f = fine.counts[0]
    coarse = f[0::2] + np.concatenate([f[1::2], np.zeros((len(f[0::2]) - len(f[1::2]),) +
                                                         f.shape[1:], dtype=int)])
    np.testing.assert_array_equal(coarse, counts.counts[0])
