import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from normbench.errors import EmptyDataError, InsufficientDataError, SchemaError, SplitError
from normbench.series_data import (chronological_split, make_samples, parse_csv, sine_ohlc,
                                   split_samples, synth_ohlc, to_csv)

HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"


def test_parse_single_row():
    table = parse_csv(HEADER + "2016-01-04,25623.35,25672.90,25411.50,25580.30,25580.30,1200\n")
    assert len(table) == 1
    rec = table.records[0]
    assert rec.close == 25580.30
    assert rec.date == dt.date(2016, 1, 4)
    assert table.dropped == 0


def test_parse_null_row_is_dropped():
    with pytest.raises(EmptyDataError, match="1 dropped"):
        parse_csv(HEADER + "2016-01-04,25623.35,25672.90,25411.50,null,null,null\n")


def test_parse_null_row_counted():
    text = (HEADER + "2016-01-04,25623.35,25672.90,25411.50,null,null,null\n"
            "2016-01-05,25580.0,25600.0,25400.0,25500.0,25500.0,10\n")
    table = parse_csv(text)
    assert len(table) == 1
    assert table.dropped == 1


def test_parse_sorts_by_date():
    text = (HEADER + "2016-01-06,10,12,9,11,11,1\n"
            "2016-01-05,20,22,19,21,21,1\n")
    table = parse_csv(text)
    assert table.dates == [dt.date(2016, 1, 5), dt.date(2016, 1, 6)]
    assert table.records[0].close == 21


def test_parse_extra_column_order():
    text = "Volume,Close,Low,High,Open,Date\n5,11,9,12,10,2016-01-04\n"
    rec = parse_csv(text).records[0]
    assert (rec.open, rec.high, rec.low, rec.close) == (10, 12, 9, 11)


@pytest.mark.parametrize("row", [
    "2016-01-04,abc,12,9,11",      # unparsable
    "2016-01-04,10,12,9,13",       # close above high
    "2016-01-04,-10,12,-19,11",    # negative price
    "2016-01-04,10,12,9",          # short row
])
def test_parse_bad_rows_dropped(row):
    text = "Date,Open,High,Low,Close\n" + row + "\n2016-01-05,10,12,9,11\n"
    table = parse_csv(text)
    assert len(table) == 1 and table.dropped == 1


def test_parse_missing_column():
    with pytest.raises(SchemaError, match="Close"):
        parse_csv("Date,Open,High,Low\n2016-01-04,1,2,0.5\n")


def test_parse_non_iso_date():
    with pytest.raises(SchemaError):
        parse_csv("Date,Open,High,Low,Close\n04/01/2016,10,12,9,11\n")


def test_parse_empty():
    with pytest.raises(SchemaError):
        parse_csv("")


@pytest.mark.parametrize("n, expected", [
    (493, (345, 74, 74)),
    (503, (352, 76, 75)),
    (10, (7, 2, 1)),
])
def test_split_counts(n, expected):
    s = chronological_split(n, 0.70, 0.15)
    assert (s.train_len, s.val_len, s.test_len) == expected


def test_split_accepts_table():
    s = chronological_split(synth_ohlc(1, 493))
    assert s.train_len == 345


@pytest.mark.parametrize("n, fracs", [(2, (0.7, 0.15)), (3, (0.5, 0.5)), (3, (0.1, 0.1)),
                                      (10, (0.0, 0.2))])
def test_split_errors(n, fracs):
    with pytest.raises(SplitError):
        chronological_split(n, *fracs)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(3, 3000), train=st.floats(0.05, 0.9), val=st.floats(0.01, 0.5))
def test_split_partition(n, train, val):
    if train + val >= 0.99:
        return
    try:
        s = chronological_split(n, train, val)
    except SplitError:
        return
    assert s.total == n
    assert min(s.train_len, s.val_len, s.test_len) >= 1
    (a0, a1), (b0, b1), (c0, c1) = s.bounds()
    assert a0 == 0 and a1 == b0 and b1 == c0 and c1 == n


def test_split_slices_reassemble():
    table = synth_ohlc(3, 50)
    s = chronological_split(table)
    parts = [table.slice(lo, hi) for lo, hi in s.bounds()]
    assert sum((p.records for p in parts), ()) == table.records


def test_make_samples_identity_window():
    table = synth_ohlc(2, 5)
    ss = make_samples(table, window_len=1, horizon=0)
    assert len(ss) == 5
    assert np.array_equal(ss.targets, table.column("close"))
    assert ss.inputs.shape == (5, 1, 3)
    assert np.array_equal(ss.inputs[:, 0, 0], table.column("open"))


def test_make_samples_counts_and_targets():
    table = synth_ohlc(2, 5)
    close = table.column("close")
    assert len(make_samples(table, 3, 0)) == 3
    ss = make_samples(table, 3, 1)
    assert len(ss) == 2
    # 1-based close(4), close(5)
    assert np.array_equal(ss.targets, close[[3, 4]])
    assert np.array_equal(ss.inputs[1, :, 1], table.column("high")[1:4])


def test_make_samples_too_short():
    with pytest.raises(InsufficientDataError):
        make_samples(synth_ohlc(2, 5), 5, 1)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 40), w=st.integers(1, 12), h=st.integers(0, 5))
def test_make_samples_count_property(n, w, h):
    table = synth_ohlc(0, n)
    if n < w + h:
        with pytest.raises(InsufficientDataError):
            make_samples(table, w, h)
        return
    ss = make_samples(table, w, h)
    assert len(ss) == n - w - h + 1
    assert ss.inputs.shape == (len(ss), w, 3)


def test_split_samples_segment_sizes():
    table = synth_ohlc(7, 493)
    s = chronological_split(table)
    train, val, test = split_samples(make_samples(table, 10, 0), s)
    assert (len(train), len(val), len(test)) == (345 - 9, 74, 74)
    assert train.target_rows.max() < 345 <= val.target_rows.min()
    assert test.target_rows.min() == 345 + 74


def test_synth_invariants_and_determinism():
    table = synth_ohlc(7, 493)
    assert len(table) == 493
    for r in table.records:
        assert r.low <= min(r.open, r.close) and r.high >= max(r.open, r.close)
        assert r.low > 0
    assert synth_ohlc(7, 493) == table
    assert synth_ohlc(8, 493) != table
    assert len(synth_ohlc(7, 1)) == 1


def test_sine_table_valid():
    table = sine_ohlc(500)
    assert len(table) == 500
    assert all(r.is_valid() for r in table.records)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 60))
def test_csv_round_trip(seed, n):
    table = synth_ohlc(seed, n)
    again = parse_csv(to_csv(table), table.name)
    assert again == table
    assert parse_csv(to_csv(again), table.name) == again
