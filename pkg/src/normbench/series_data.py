"""OHLC ingestion, chronological splitting and windowing.

Tables are immutable: a :class:`TimeSeriesTable` holds a tuple of
:class:`OhlcRecord` sorted by date, and every operation here returns new
values instead of mutating its inputs.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDataError, InsufficientDataError, SchemaError, SplitError

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("Date", "Open", "High", "Low", "Close")
FEATURES = ("open", "high", "low")
TARGET = "close"


@dataclass(frozen=True)
class OhlcRecord:
    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def is_valid(self) -> bool:
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            return False
        return (self.low <= self.open <= self.high
                and self.low <= self.close <= self.high)


@dataclass(frozen=True)
class TimeSeriesTable:
    records: tuple[OhlcRecord, ...]
    name: str = "series"
    # rows dropped while parsing; not part of the table's identity
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.records) < 1:
            raise EmptyDataError(f"table {self.name!r} has no records")
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.date <= prev.date:
                raise SchemaError(f"dates not strictly increasing at {cur.date}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dates(self) -> list[dt.date]:
        return [r.date for r in self.records]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def columns(self) -> dict[str, np.ndarray]:
        """All four price columns keyed by ``open``/``high``/``low``/``close``."""
        return {name: self.column(name) for name in (*FEATURES, TARGET)}

    def slice(self, start: int, stop: int) -> "TimeSeriesTable":
        return TimeSeriesTable(self.records[start:stop], self.name)


@dataclass(frozen=True)
class SplitIndices:
    train_len: int
    val_len: int
    test_len: int

    @property
    def total(self) -> int:
        return self.train_len + self.val_len + self.test_len

    def bounds(self) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        """``(start, stop)`` row ranges of the train, validation and test segments."""
        a = self.train_len
        b = a + self.val_len
        return (0, a), (a, b), (b, self.total)


@dataclass(frozen=True)
class SampleSet:
    """Windowed supervised pairs.

    ``inputs`` has shape ``(n_samples, window_len, 3)``; ``targets`` has shape
    ``(n_samples,)``. ``target_rows`` records the table row each target was
    taken from, which lets reports attach dates to predictions.
    """

    inputs: np.ndarray
    targets: np.ndarray
    window_len: int
    horizon: int
    target_rows: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise InsufficientDataError("inputs and targets differ in length")
        if self.inputs.ndim != 3 or self.inputs.shape[1:] != (self.window_len, len(FEATURES)):
            raise InsufficientDataError(f"bad input block shape {self.inputs.shape}")

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, mask_or_index) -> "SampleSet":
        return SampleSet(self.inputs[mask_or_index], self.targets[mask_or_index],
                         self.window_len, self.horizon, self.target_rows[mask_or_index])


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise SchemaError(f"date {text!r} is not ISO-8601 (YYYY-MM-DD)") from exc


def parse_csv(raw_text: str | Iterable[str], name: str = "series") -> TimeSeriesTable:
    """Parse Yahoo-style OHLC CSV text into a date-sorted table.

    Rows with ``null`` tokens, unparsable prices, violated OHLC ordering or a
    repeated date are skipped; the number skipped is kept on
    ``table.dropped``. A malformed date is a schema error rather than a
    dropped row.
    """
    if isinstance(raw_text, str):
        raw_text = io.StringIO(raw_text)
    reader = csv.reader(raw_text)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty input, no header row") from None
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    idx = {c: header.index(c) for c in REQUIRED_COLUMNS}

    rows: dict[dt.date, OhlcRecord] = {}
    dropped = 0
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            cells = [row[idx[c]].strip() for c in REQUIRED_COLUMNS]
        except IndexError:
            dropped += 1
            continue
        date = _parse_date(cells[0])
        try:
            prices = [float(c) for c in cells[1:]]
        except ValueError:
            # covers the literal "null" token Yahoo emits for holidays
            dropped += 1
            continue
        rec = OhlcRecord(date, *prices)
        if not rec.is_valid() or date in rows:
            dropped += 1
            continue
        rows[date] = rec

    if dropped:
        log.warning("%s: dropped %d malformed row(s)", name, dropped)
    if not rows:
        raise EmptyDataError(f"{name}: no valid data rows ({dropped} dropped)")
    records = tuple(rows[d] for d in sorted(rows))
    return TimeSeriesTable(records, name, dropped)


def read_csv(path, name: str | None = None) -> TimeSeriesTable:
    from pathlib import Path

    path = Path(path)
    with path.open(newline="") as fh:
        return parse_csv(fh, name or path.stem)


def to_csv(table: TimeSeriesTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for r in table.records:
        writer.writerow([r.date.isoformat(), repr(r.open), repr(r.high), repr(r.low), repr(r.close)])
    return buf.getvalue()


def chronological_split(table: TimeSeriesTable | int, train_frac: float = 0.70,
                        val_frac: float = 0.15) -> SplitIndices:
    """Contiguous train/validation/test lengths.

    Training gets ``floor(train_frac * n)`` rows, validation
    ``ceil(val_frac * n)`` and test the remainder. This reproduces
    493 -> (345, 74, 74) and 503 -> (352, 76, 75).
    """
    n = table if isinstance(table, int) else len(table)
    if not (0 < train_frac and 0 < val_frac and train_frac + val_frac < 1):
        raise SplitError(f"invalid fractions ({train_frac}, {val_frac})")
    if n < 3:
        raise SplitError(f"need at least 3 rows to split, got {n}")
    # the tiny slack absorbs products like 0.7 * 10 = 7.000000000000001
    train_len = math.floor(train_frac * n + 1e-9)
    val_len = math.ceil(val_frac * n - 1e-9)
    test_len = n - train_len - val_len
    if min(train_len, val_len, test_len) < 1:
        raise SplitError(f"split of {n} rows leaves an empty segment "
                         f"({train_len}, {val_len}, {test_len})")
    return SplitIndices(train_len, val_len, test_len)


def window_arrays(features: np.ndarray, targets: np.ndarray, window_len: int,
                  horizon: int = 0) -> SampleSet:
    """Window a ``(n, 3)`` feature block and an ``(n,)`` target column."""
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(targets)
    if window_len < 1 or horizon < 0:
        raise InsufficientDataError(f"invalid window_len={window_len}, horizon={horizon}")
    if features.shape != (n, len(FEATURES)):
        raise InsufficientDataError(f"feature block has shape {features.shape}, expected ({n}, 3)")
    count = n - window_len - horizon + 1
    if count < 1:
        raise InsufficientDataError(
            f"{n} rows cannot hold a window of {window_len} plus horizon {horizon}")
    starts = np.arange(count)
    inputs = features[starts[:, None] + np.arange(window_len)[None, :]]
    rows = starts + window_len - 1 + horizon
    return SampleSet(inputs, targets[rows].copy(), window_len, horizon, rows)


def make_samples(table: TimeSeriesTable, window_len: int = 10, horizon: int = 0) -> SampleSet:
    """Sample ``i`` sees open/high/low for rows ``i .. i+window_len-1`` and
    targets the close ``horizon`` rows after the window's last row."""
    cols = table.columns()
    features = np.column_stack([cols[f] for f in FEATURES])
    return window_arrays(features, cols[TARGET], window_len, horizon)


def split_samples(samples: SampleSet, split: SplitIndices) -> tuple[SampleSet, SampleSet, SampleSet]:
    """Assign windowed samples to segments by the row of their target.

    Training windows lie wholly inside the training rows. Validation and test
    windows may look back into earlier segments' inputs, so every validation
    and test row yields exactly one sample.
    """
    (_, a), (_, b), _ = split.bounds()
    window_start = samples.target_rows - samples.horizon - samples.window_len + 1
    train = samples.target_rows < a
    val = (samples.target_rows >= a) & (samples.target_rows < b)
    test = samples.target_rows >= b
    assert np.all(window_start[train] >= 0)
    parts = tuple(samples.subset(m) for m in (train, val, test))
    for label, part in zip(("train", "validation", "test"), parts):
        if len(part) == 0:
            raise InsufficientDataError(f"{label} segment yields no samples")
    return parts


def _business_days(start: dt.date, n: int) -> list[dt.date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def synth_ohlc(seed: int, n: int, *, start_price: float = 10000.0, daily_vol: float = 0.01,
               name: str | None = None, start_date: dt.date = dt.date(2016, 1, 4)) -> TimeSeriesTable:
    """Deterministic geometric random-walk OHLC series."""
    if n < 1:
        raise InsufficientDataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    log_ret = rng.normal(0.0, daily_vol, n)
    close = start_price * np.exp(np.cumsum(log_ret))
    prev_close = np.concatenate([[start_price], close[:-1]])
    open_ = prev_close * np.exp(rng.normal(0.0, daily_vol * 0.3, n))
    top = np.maximum(open_, close)
    bottom = np.minimum(open_, close)
    high = top * np.exp(np.abs(rng.normal(0.0, daily_vol * 0.5, n)))
    low = bottom * np.exp(-np.abs(rng.normal(0.0, daily_vol * 0.5, n)))
    dates = _business_days(start_date, n)
    records = tuple(OhlcRecord(d, float(o), float(h), float(lo), float(c))
                    for d, o, h, lo, c in zip(dates, open_, high, low, close))
    return TimeSeriesTable(records, name or f"synth-{seed}")


def sine_ohlc(n: int, *, period: float = 40.0, level: float = 100.0, amplitude: float = 10.0,
              name: str = "sine", start_date: dt.date = dt.date(2016, 1, 4)) -> TimeSeriesTable:
    """Noise-free OHLC bars around a sine close, for training sanity checks."""
    t = np.arange(n + 1, dtype=np.float64)
    path = level + amplitude * np.sin(2 * np.pi * t / period)
    open_, close = path[:-1], path[1:]
    pad = 0.05 * amplitude
    high = np.maximum(open_, close) + pad
    low = np.minimum(open_, close) - pad
    dates = _business_days(start_date, n)
    records = tuple(OhlcRecord(d, float(o), float(h), float(lo), float(c))
                    for d, o, h, lo, c in zip(dates, open_, high, low, close))
    return TimeSeriesTable(records, name)
