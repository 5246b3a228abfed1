"""Normalization sweep: scale, window, train, evaluate, report.

A sweep is a grid of independent cells, one per (dataset, method, seed).
Each cell fits its scalers on the training rows, trains a fresh network and
scores the test segment both in normalized units and, after inverting the
close-price scaler, in price units.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import normalizers as nz
from .drnn import NetSpec, TrainConfig, init_model, predict, train
from .errors import NormbenchError
from .metrics import ErrorPair, error_pair
from .series_data import (FEATURES, TARGET, TimeSeriesTable, chronological_split, read_csv,
                          split_samples, synth_ohlc, window_arrays)

log = logging.getLogger(__name__)

REPORT_VERSION = 1


@dataclass(frozen=True)
class DatasetSource:
    """Either a CSV path or a synthetic (seed, length) pair."""

    name: str
    path: str | None = None
    synth_seed: int | None = None
    synth_n: int | None = None

    def __post_init__(self):
        if (self.path is None) == (self.synth_seed is None):
            raise NormbenchError(f"dataset {self.name!r} needs exactly one of path / synthetic seed")
        if self.synth_seed is not None and not (self.synth_n and self.synth_n >= 1):
            raise NormbenchError(f"synthetic dataset {self.name!r} needs a positive length")

    def load(self) -> TimeSeriesTable:
        if self.path is not None:
            path = Path(self.path)
            if not path.is_file():
                raise FileNotFoundError(f"data file not found: {self.path}")
            return read_csv(path, self.name)
        return synth_ohlc(self.synth_seed, self.synth_n, name=self.name)

    def to_dict(self) -> dict:
        return {k: v for k, v in (("name", self.name), ("path", self.path),
                                  ("synth_seed", self.synth_seed), ("synth_n", self.synth_n))
                if v is not None}


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetSource, ...]
    methods: tuple[nz.Method, ...] = nz.ALL_METHODS
    net: NetSpec = NetSpec()
    train: TrainConfig = TrainConfig()
    window_len: int = 10
    horizon: int = 0
    train_frac: float = 0.70
    val_frac: float = 0.15
    seeds: tuple[int, ...] = (0,)
    minmax_range: tuple[float, float] = (0.0, 1.0)
    output_dir: str = "results"

    def __post_init__(self):
        if not self.methods:
            raise NormbenchError("method list is empty")
        if not self.datasets:
            raise NormbenchError("no datasets configured")
        if not self.seeds:
            raise NormbenchError("seed list is empty")
        if not (0 < self.train_frac and 0 < self.val_frac and self.train_frac + self.val_frac < 1):
            raise NormbenchError(f"invalid split fractions ({self.train_frac}, {self.val_frac})")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise NormbenchError(f"dataset names must be unique, got {names}")

    def to_dict(self) -> dict:
        return {
            "datasets": [d.to_dict() for d in self.datasets],
            "methods": [m.value for m in self.methods],
            "net": self.net.to_dict(),
            "train": self.train.to_dict(),
            "window_len": self.window_len,
            "horizon": self.horizon,
            "train_frac": self.train_frac,
            "val_frac": self.val_frac,
            "seeds": list(self.seeds),
            "minmax_range": list(self.minmax_range),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        return cls(
            datasets=tuple(DatasetSource(**x) for x in d["datasets"]),
            methods=tuple(nz.Method(m) for m in d["methods"]),
            net=NetSpec.from_dict(d["net"]),
            train=TrainConfig(**d["train"]),
            window_len=d["window_len"],
            horizon=d["horizon"],
            train_frac=d["train_frac"],
            val_frac=d["val_frac"],
            seeds=tuple(d["seeds"]),
            minmax_range=tuple(d["minmax_range"]),
            output_dir=d.get("output_dir", "results"),
        )


@dataclass
class CellResult:
    dataset: str
    method: nz.Method
    seed: int
    split: dict | None = None
    normalized: ErrorPair | None = None
    price: ErrorPair | None = None
    dates: list[str] = field(default_factory=list)
    actual_norm: list[float] = field(default_factory=list)
    pred_norm: list[float] = field(default_factory=list)
    actual_price: list[float] = field(default_factory=list)
    pred_price: list[float] | None = None
    history: dict | None = None
    scalers: dict | None = None
    error: str | None = None
    price_error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def key(self) -> str:
        return f"{self.dataset}__{self.method.value}__seed{self.seed}"

    def close_scaler(self) -> nz.ScalerParams:
        return nz.ScalerParams.from_dict(self.scalers[TARGET])

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method.value,
            "seed": self.seed,
            "split": self.split,
            "normalized": self.normalized.to_dict() if self.normalized else None,
            "price": self.price.to_dict() if self.price else None,
            "dates": self.dates,
            "actual_norm": self.actual_norm,
            "pred_norm": self.pred_norm,
            "actual_price": self.actual_price,
            "pred_price": self.pred_price,
            "history": self.history,
            "scalers": self.scalers,
            "error": self.error,
            "price_error": self.price_error,
        }

    @classmethod
    def from_dict(cls, d) -> "CellResult":
        d = dict(d)
        d["method"] = nz.Method(d["method"])
        for k in ("normalized", "price"):
            if d[k] is not None:
                d[k] = ErrorPair.from_dict(d[k])
        return cls(**d)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list[CellResult]

    def cell(self, dataset: str, method: nz.Method | str, seed: int) -> CellResult:
        method = nz.Method.parse(method) if isinstance(method, str) else method
        for c in self.cells:
            if (c.dataset, c.method, c.seed) == (dataset, method, seed):
                return c
        raise KeyError((dataset, method, seed))

    def median_errors(self, dataset: str, method: nz.Method | str,
                      space: str = "normalized") -> ErrorPair | None:
        """Median MSE and MAE over the seeds whose cell succeeded."""
        method = nz.Method.parse(method) if isinstance(method, str) else method
        pairs = [getattr(c, space) for c in self.cells
                 if c.dataset == dataset and c.method is method and getattr(c, space) is not None]
        if not pairs:
            return None
        return ErrorPair(statistics.median(p.mse for p in pairs),
                         statistics.median(p.mae for p in pairs))

    def to_dict(self) -> dict:
        return {"version": REPORT_VERSION, "config": self.config.to_dict(),
                "cells": [c.to_dict() for c in self.cells]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d) -> "ExperimentReport":
        return cls(ExperimentConfig.from_dict(d["config"]),
                   [CellResult.from_dict(c) for c in d["cells"]])

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def run_cell(table: TimeSeriesTable, method: nz.Method, seed: int,
             cfg: ExperimentConfig) -> CellResult:
    """Train and score one (dataset, method, seed) combination.

    Scaling and training failures are captured in ``CellResult.error``.
    """
    cell = CellResult(table.name, method, seed)
    try:
        split = chronological_split(table, cfg.train_frac, cfg.val_frac)
        cell.split = {"train": split.train_len, "val": split.val_len, "test": split.test_len}
        low, high = cfg.minmax_range
        cols = table.columns()
        norm, params = nz.fit_transform_table(method, cols, slice(0, split.train_len),
                                              low=low, high=high)
        cell.scalers = {name: p.to_dict() for name, p in zip(cols, params)}
        close_params = params[list(cols).index(TARGET)]

        samples = window_arrays(np.column_stack([norm[f] for f in FEATURES]), norm[TARGET],
                                cfg.window_len, cfg.horizon)
        train_set, val_set, test_set = split_samples(samples, split)
        model = init_model(cfg.net, seed)
        model, hist = train(model, train_set, val_set, replace(cfg.train, seed=seed))
        cell.history = hist.to_dict()

        pred = predict(model, test_set)
        dates = table.dates
        cell.dates = [dates[r].isoformat() for r in test_set.target_rows]
        cell.actual_norm = test_set.targets.tolist()
        cell.pred_norm = pred.tolist()
        cell.normalized = error_pair(pred, test_set.targets)
        cell.actual_price = cols[TARGET][test_set.target_rows].tolist()
    except (NormbenchError, FloatingPointError) as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
        log.warning("%s/%s/seed %d failed: %s", table.name, method.value, seed, cell.error)
        return cell

    try:
        pred_price = np.asarray(nz.inverse(close_params, pred), dtype=np.float64)
        if not np.all(np.isfinite(pred_price)):
            raise NormbenchError("inverse produced non-finite prices")
        cell.pred_price = pred_price.tolist()
        cell.price = error_pair(pred_price, cell.actual_price)
    except NormbenchError as exc:
        # e.g. sigmoid saturates at 1.0 on raw prices, leaving nothing to invert
        cell.price_error = f"{type(exc).__name__}: {exc}"
    return cell


def _run_cell_job(args):
    source, method, seed, cfg = args
    return run_cell(source.load(), method, seed, cfg)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run every (dataset, method, seed) cell of ``cfg``.

    Cells are independent, so ``jobs > 1`` spreads them over worker
    processes without changing any result.
    """
    tables = {src.name: src.load() for src in cfg.datasets}
    grid = [(src, m, s) for src in cfg.datasets for m in cfg.methods for s in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            cells = list(pool.map(_run_cell_job, [(src, m, s, cfg) for src, m, s in grid]))
    else:
        cells = [run_cell(tables[src.name], m, s, cfg) for src, m, s in grid]
    if not any(c.ok for c in cells):
        raise NormbenchError("every experiment cell failed: " + "; ".join(
            f"{c.key}: {c.error}" for c in cells[:3]))
    return ExperimentReport(cfg, cells)


def _fmt(x: float) -> str:
    return f"{x:.4e}"


def markdown_tables(report: ExperimentReport) -> str:
    """One table per dataset and error space; rows are methods."""
    seeds = report.config.seeds
    out = []
    for src in report.config.datasets:
        for space, label in (("normalized", "normalized units"), ("price", "price units")):
            out.append(f"### {src.name}: prediction errors ({label})\n")
            if len(seeds) > 1:
                out.append(f"Median over seeds {', '.join(map(str, seeds))}.\n")
            out.append("| Normalization Techniques | MSE | MAE |")
            out.append("|---|---|---|")
            for m in report.config.methods:
                pair = report.median_errors(src.name, m, space)
                if pair is None:
                    cells = [c for c in report.cells if c.dataset == src.name and c.method is m]
                    reason = "failed" if any(not c.ok for c in cells) else "n/a"
                    out.append(f"| {m.label} | {reason} | {reason} |")
                else:
                    out.append(f"| {m.label} | {_fmt(pair.mse)} | {_fmt(pair.mae)} |")
            out.append("")
    return "\n".join(out)


def write_prediction_csv(cell: CellResult, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "actual", "predicted", "actual_norm", "predicted_norm"])
        pred_price = cell.pred_price if cell.pred_price is not None else [""] * len(cell.dates)
        for row in zip(cell.dates, cell.actual_price, pred_price, cell.actual_norm, cell.pred_norm):
            w.writerow([row[0], *(repr(v) if v != "" else "" for v in row[1:])])


def emit_report(report: ExperimentReport, out_dir, formats: Sequence[str] = ("json", "markdown", "csv")):
    """Write ``report.json``, ``tables.md`` and ``predictions/<cell>.csv``.

    Returns the list of written paths.
    """
    if not report.cells:
        raise NormbenchError("report is empty")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise NormbenchError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    try:
        if "json" in formats:
            p = out / "report.json"
            p.write_text(report.to_json())
            written.append(p)
        if "markdown" in formats:
            p = out / "tables.md"
            p.write_text(markdown_tables(report))
            written.append(p)
        if "csv" in formats:
            pred_dir = out / "predictions"
            pred_dir.mkdir(exist_ok=True)
            for cell in report.cells:
                if cell.ok:
                    p = pred_dir / f"{cell.key}.csv"
                    write_prediction_csv(cell, p)
                    written.append(p)
    except OSError as exc:
        raise NormbenchError(f"cannot write to {out}: {exc}") from exc
    return written
