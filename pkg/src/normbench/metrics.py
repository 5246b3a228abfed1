"""Forecast error measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NormbenchError


@dataclass(frozen=True)
class ErrorPair:
    mse: float
    mae: float

    def to_dict(self) -> dict:
        return {"mse": self.mse, "mae": self.mae}

    @classmethod
    def from_dict(cls, d) -> "ErrorPair":
        return cls(float(d["mse"]), float(d["mae"]))


def _residuals(pred, actual) -> np.ndarray:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size != a.size:
        raise NormbenchError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise NormbenchError("cannot score empty series")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise NormbenchError("non-finite values in scored series")
    return p - a


def mse(pred, actual) -> float:
    r = _residuals(pred, actual)
    return float(np.mean(r * r))


def mae(pred, actual) -> float:
    return float(np.mean(np.abs(_residuals(pred, actual))))


def error_pair(pred, actual) -> ErrorPair:
    return ErrorPair(mse(pred, actual), mae(pred, actual))
