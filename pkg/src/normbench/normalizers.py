"""The six scaling techniques as fit / transform / inverse triples.

Statistics are fitted on one column at a time (callers pass training rows
only) and stored in an immutable :class:`ScalerParams`. ``transform`` and
``inverse`` accept scalars or numpy arrays.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, logit

from .errors import DegenerateColumnError, DomainError, NormbenchError

log = logging.getLogger(__name__)

# scale factor inside the tanh estimator
TANH_SPREAD = 0.01


class Method(str, enum.Enum):
    MINMAX = "minmax"
    DECIMAL = "decimal"
    ZSCORE = "zscore"
    MEDIAN = "median"
    SIGMOID = "sigmoid"
    TANH = "tanh"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "Method":
        key = text.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        aliases = {"decimalscaling": "decimal", "tanhestimator": "tanh", "z": "zscore"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise NormbenchError(f"unknown normalization method {text!r}") from None


_LABELS = {
    Method.MINMAX: "MinMax",
    Method.DECIMAL: "Decimal Scaling",
    Method.ZSCORE: "ZScore",
    Method.MEDIAN: "Median",
    Method.SIGMOID: "Sigmoid",
    Method.TANH: "Tanh Estimator",
}

# row order used by the report tables
ALL_METHODS = (Method.MINMAX, Method.DECIMAL, Method.ZSCORE,
               Method.SIGMOID, Method.TANH, Method.MEDIAN)


@dataclass(frozen=True)
class ScalerParams:
    """Fitted statistics; only the fields used by ``method`` are set."""

    method: Method
    min_x: float | None = None
    max_x: float | None = None
    low: float | None = None
    high: float | None = None
    d: int | None = None
    mu: float | None = None
    sigma: float | None = None
    median_x: float | None = None

    def __post_init__(self):
        m = self.method
        if m is Method.MINMAX:
            if not self.max_x > self.min_x:
                raise DegenerateColumnError(f"min-max needs max > min, got [{self.min_x}, {self.max_x}]")
            if not self.high > self.low:
                raise DegenerateColumnError(f"target range [{self.low}, {self.high}] is empty")
        elif m in (Method.ZSCORE, Method.TANH):
            if not self.sigma > 0:
                raise DegenerateColumnError(f"{m.value} needs a positive standard deviation")
        elif m is Method.MEDIAN:
            if self.median_x == 0 or self.median_x is None:
                raise DegenerateColumnError("median normalization needs a non-zero median")
        elif m is Method.DECIMAL:
            if self.d is None or self.d < 0 or int(self.d) != self.d:
                raise DegenerateColumnError(f"decimal exponent must be a non-negative integer, got {self.d}")
        for k, v in self._fields().items():
            if isinstance(v, float) and not math.isfinite(v):
                raise DegenerateColumnError(f"non-finite statistic {k}={v}")

    def _fields(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "method" and v is not None}

    def to_dict(self) -> dict:
        return {"method": self.method.value, **self._fields()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScalerParams":
        data = dict(data)
        method = Method(data.pop("method"))
        if "d" in data:
            data["d"] = int(data["d"])
        return cls(method, **{k: (v if k == "d" else float(v)) for k, v in data.items()})


def decimal_exponent(max_abs: float) -> int:
    """Smallest ``d >= 0`` with ``max_abs / 10**d < 1``."""
    d = 0
    while max_abs / 10.0 ** d >= 1.0:
        d += 1
    return d


def fit(method: Method | str, column: Sequence[float], *, low: float = 0.0,
        high: float = 1.0) -> ScalerParams:
    """Fit ``method`` on ``column``.

    ``low``/``high`` only matter for min-max. Standard deviations are the
    population version (ddof=0).
    """
    method = Method.parse(method) if isinstance(method, str) else method
    x = np.asarray(column, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DegenerateColumnError("cannot fit on an empty column")
    if not np.all(np.isfinite(x)):
        raise DegenerateColumnError("column contains non-finite values")

    if method is Method.MINMAX:
        return ScalerParams(method, min_x=float(x.min()), max_x=float(x.max()),
                            low=float(low), high=float(high))
    if method is Method.DECIMAL:
        return ScalerParams(method, d=decimal_exponent(float(np.abs(x).max())))
    if method in (Method.ZSCORE, Method.TANH):
        return ScalerParams(method, mu=float(x.mean()), sigma=float(x.std(ddof=0)))
    if method is Method.MEDIAN:
        return ScalerParams(method, median_x=float(np.median(x)))
    return ScalerParams(method)


def transform(params: ScalerParams, x):
    m = params.method
    x = np.asarray(x, dtype=np.float64)
    if m is Method.MINMAX:
        y = params.low + (params.high - params.low) * (x - params.min_x) / (params.max_x - params.min_x)
    elif m is Method.DECIMAL:
        y = x / 10.0 ** params.d
    elif m is Method.ZSCORE:
        y = (x - params.mu) / params.sigma
    elif m is Method.MEDIAN:
        y = x / params.median_x
    elif m is Method.SIGMOID:
        y = expit(x)
    else:
        y = 0.5 * (np.tanh(TANH_SPREAD * (x - params.mu) / params.sigma) + 1.0)
    return y[()] if y.ndim == 0 else y


def inverse(params: ScalerParams, y):
    """Map normalized values back to the original units.

    Sigmoid and tanh-estimator outputs must lie strictly inside (0, 1).
    """
    m = params.method
    y = np.asarray(y, dtype=np.float64)
    if m in (Method.SIGMOID, Method.TANH) and not np.all((y > 0) & (y < 1)):
        raise DomainError(f"{m.label} inverse is defined only on (0, 1)")
    if m is Method.MINMAX:
        x = params.min_x + (y - params.low) * (params.max_x - params.min_x) / (params.high - params.low)
    elif m is Method.DECIMAL:
        x = y * 10.0 ** params.d
    elif m is Method.ZSCORE:
        x = y * params.sigma + params.mu
    elif m is Method.MEDIAN:
        x = y * params.median_x
    elif m is Method.SIGMOID:
        x = logit(y)
    else:
        x = params.mu + params.sigma / TANH_SPREAD * np.arctanh(2.0 * y - 1.0)
    return x[()] if x.ndim == 0 else x


def fit_transform_table(method: Method | str, columns: Mapping[str, Sequence[float]],
                        fit_rows: slice | range, **fit_kwargs):
    """Fit one scaler per column on ``fit_rows`` and apply it to every row.

    Returns ``(normalized, params)`` where ``normalized`` maps column name to
    array and ``params`` lists the fitted scalers in column order. Values
    outside the fit rows are transformed with the same statistics, so e.g.
    min-max output can leave ``[low, high]`` on the test segment.
    """
    if isinstance(fit_rows, range):
        if fit_rows.step != 1:
            raise NormbenchError("fit_rows must be contiguous")
        fit_rows = slice(fit_rows.start, fit_rows.stop)
    normalized: dict[str, np.ndarray] = {}
    params: list[ScalerParams] = []
    for name, col in columns.items():
        col = np.asarray(col, dtype=np.float64)
        fit_part = col[fit_rows]
        if fit_part.size == 0 or (fit_rows.stop is not None and fit_rows.stop > col.size):
            raise NormbenchError(f"fit rows {fit_rows} out of bounds for {col.size} rows")
        try:
            p = fit(method, fit_part, **fit_kwargs)
        except DegenerateColumnError as exc:
            raise DegenerateColumnError(f"column {name!r}: {exc}") from exc
        y = transform(p, col)
        if p.method is Method.DECIMAL and np.any(np.abs(y) >= 1):
            log.info("column %r: decimal scaling maps %d value(s) outside (-1, 1)",
                     name, int(np.sum(np.abs(y) >= 1)))
        normalized[name] = y
        params.append(p)
    return normalized, params
