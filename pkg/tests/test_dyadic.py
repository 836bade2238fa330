import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldptrack.dyadic import (DerivativeStream, DyadicInterval, TruthSeries,
                             decompose, derive, order_support, partial_sum)


def test_derive_example():
    assert derive((0, 1, 1, 0)).entries == (0, 1, 0, -1)


def test_derive_constant_zero():
    assert derive((0, 0, 0, 0)).entries == (0, 0, 0, 0)


def test_derive_single_initial_change():
    assert derive((1, 1, 1, 1)).entries == (1, 0, 0, 0)


def test_derive_rejects_non_boolean():
    with pytest.raises(ValueError):
        derive((0, 2, 0))
    with pytest.raises(ValueError):
        derive(())


def test_decompose_example():
    parts = decompose(3, 4)
    assert [(iv.order, iv.index) for iv in parts] == [(1, 1), (0, 3)]
    assert list(parts[0].times()) == [1, 2]
    assert list(parts[1].times()) == [3]


def test_decompose_whole_horizon():
    (iv,) = decompose(8, 8)
    assert (iv.order, iv.index) == (3, 1)


def test_decompose_t7_d8():
    parts = decompose(7, 8)
    assert [(iv.order, iv.index) for iv in parts] == [(2, 1), (1, 3), (0, 7)]
    assert len(parts) == bin(7).count("1")


def test_decompose_out_of_range():
    with pytest.raises(ValueError):
        decompose(0, 4)
    with pytest.raises(ValueError):
        decompose(5, 4)
    with pytest.raises(ValueError):
        decompose(2, 6)  # horizon not a power of two


def test_interval_validation():
    iv = DyadicInterval(order=1, index=2, horizon=4)
    assert (iv.start, iv.end) == (3, 4)
    assert 3 in iv and 4 in iv and 2 not in iv
    with pytest.raises(ValueError):
        DyadicInterval(order=3, index=1, horizon=4)
    with pytest.raises(ValueError):
        DyadicInterval(order=1, index=3, horizon=4)
    with pytest.raises(ValueError):
        DyadicInterval(order=0, index=1, horizon=3)


def test_partial_sum_examples():
    ds = derive((0, 1, 1, 0))
    assert partial_sum(ds, DyadicInterval(order=1, index=1, horizon=4)) == 1
    assert partial_sum(ds, DyadicInterval(order=2, index=1, horizon=4)) == 0
    zero = derive((0, 0, 0, 0))
    for h, j in [(0, 1), (1, 2), (2, 1)]:
        assert partial_sum(zero, DyadicInterval(order=h, index=j, horizon=4)) == 0


def test_partial_sum_horizon_mismatch():
    ds = derive((0, 1))
    with pytest.raises(ValueError):
        partial_sum(ds, DyadicInterval(order=0, index=1, horizon=4))


def test_order_support_examples():
    ds = derive((0, 1, 1, 0))
    assert order_support(ds, 1) == [1, 2]
    assert order_support(ds, 2) == []
    assert order_support(derive((0, 0, 0, 0)), 0) == []


def test_stream_invariant_validation():
    with pytest.raises(ValueError):
        DerivativeStream(entries=(1, 1), k=2)  # prefix sum hits 2
    with pytest.raises(ValueError):
        DerivativeStream(entries=(-1, 0), k=2)  # prefix sum hits -1
    with pytest.raises(ValueError):
        DerivativeStream(entries=(1, -1, 1, -1), k=3)  # too many changes
    with pytest.raises(ValueError):
        DerivativeStream(entries=(0, 2), k=2)


def test_truth_series_bounds():
    TruthSeries(counts=(0, 1, 2), n=2)
    with pytest.raises(ValueError):
        TruthSeries(counts=(3,), n=2)


@st.composite
def boolean_series(draw):
    log_d = draw(st.integers(min_value=0, max_value=5))
    d = 1 << log_d
    return tuple(draw(st.lists(st.integers(0, 1), min_size=d, max_size=d)))


@given(boolean_series())
def test_derive_prefix_sum_roundtrip(series):
    assert derive(series).boolean_series() == series


@given(boolean_series(), st.data())
def test_decomposition_reconstructs_prefix(series, data):
    d = len(series)
    ds = derive(series)
    t = data.draw(st.integers(1, d))
    total = sum(partial_sum(ds, iv) for iv in decompose(t, d))
    assert total == series[t - 1]


@given(st.integers(0, 6), st.data())
def test_decompose_structure(log_d, data):
    d = 1 << log_d
    t = data.draw(st.integers(1, d))
    parts = decompose(t, d)
    assert len(parts) == bin(t).count("1")
    orders = [iv.order for iv in parts]
    assert orders == sorted(orders, reverse=True) and len(set(orders)) == len(orders)
    covered = sorted(x for iv in parts for x in iv.times())
    assert covered == list(range(1, t + 1))
    for iv in parts:
        assert iv.end % (1 << iv.order) == 0


@given(boolean_series(), st.data())
@settings(max_examples=60)
def test_order_support_bounded(series, data):
    d = len(series)
    ds = derive(series)
    h = data.draw(st.integers(0, d.bit_length() - 1))
    support = order_support(ds, h)
    assert len(support) <= min(ds.k, d >> h)
    assert support == sorted(support)
    for j in support:
        assert partial_sum(ds, DyadicInterval(order=h, index=j, horizon=d)) != 0
