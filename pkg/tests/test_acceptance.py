"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line, printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from normbench import normalizers as nz
from normbench.bench import DatasetSource, ExperimentConfig, emit_report, run_experiment
from normbench.checks import gradient_mismatch
from normbench.drnn import (NetSpec, TrainConfig, bptt_gradients, finite_diff_gradients,
                            init_model, predict, train)
from normbench.metrics import mse
from normbench.series_data import (FEATURES, chronological_split, sine_ohlc, split_samples,
                                   window_arrays)


def direct_formula(method, p, x):
    """Straight transcription of the six scaling formulas, scalar math only."""
    if method == "minmax":
        return (p["high"] - p["low"]) * (x - p["min"]) / (p["max"] - p["min"]) + p["low"]
    if method == "decimal":
        return x / 10 ** p["d"]
    if method == "zscore":
        return (x - p["mu"]) / p["sd"]
    if method == "median":
        return x / p["med"]
    if method == "sigmoid":
        return 1 / (1 + math.exp(-x))
    return 0.5 * (math.tanh(0.01 * (x - p["mu"]) / p["sd"]) + 1)


def independent_stats(column):
    n = len(column)
    mu = math.fsum(column) / n
    sd = math.sqrt(math.fsum((v - mu) ** 2 for v in column) / n)
    s = sorted(column)
    med = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2
    big = max(abs(v) for v in column)
    d = 0
    while big / 10 ** d >= 1:
        d += 1
    return {"min": min(column), "max": max(column), "low": 0.0, "high": 1.0,
            "mu": mu, "sd": sd, "med": med, "d": d}


def test_1_split_fidelity(criterion):
    got = [(s.train_len, s.val_len, s.test_len)
           for s in (chronological_split(493, 0.70, 0.15), chronological_split(503, 0.70, 0.15))]
    ok = got == [(345, 74, 74), (352, 76, 75)]
    criterion("1 split fidelity 493/503", ok, f"{got}")
    assert ok


def test_2_normalizer_oracle(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = {}
    for method in nz.Method:
        if method is nz.Method.SIGMOID:
            column, xs = rng.uniform(-20, 20, 300), rng.uniform(-40, 40, 1000)
        else:
            column, xs = rng.uniform(1000, 30000, 300), rng.uniform(100, 60000, 1000)
        stats = independent_stats(column.tolist())
        params = nz.fit(method, column)
        got = nz.transform(params, xs)
        want = np.array([direct_formula(method.value, stats, float(x)) for x in xs])
        worst[method.value] = float(np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-300)))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-12 and elapsed < 1.0
    criterion("2 normalizer oracle equivalence (1e-12 rel)", ok,
              f"worst {max(worst.values()):.2e}, {elapsed:.2f}s")
    assert ok, worst


def test_3_round_trip(criterion):
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    configs = [(m, {}) for m in nz.Method] + [(nz.Method.MINMAX, {"low": -1.0, "high": 1.0})]
    worst = 0.0
    for method, kw in configs:
        if method is nz.Method.SIGMOID:
            params, xs = nz.fit(method, [0.0]), rng.uniform(-10, 10, 1000)
        else:
            params = nz.fit(method, rng.uniform(1000, 30000, 300), **kw)
            xs = rng.uniform(100, 60000, 1000)
        back = nz.inverse(params, nz.transform(params, xs))
        worst = max(worst, float(np.max(np.abs(back - xs) / np.abs(xs))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    criterion("3 inverse(transform(x)) round trip (1e-9 rel)", ok, f"worst {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_4_gradient_correctness(criterion):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst = 0.0
    trials = 25
    for _ in range(trials):
        spec = NetSpec(int(rng.integers(1, 4)), (int(rng.integers(1, 9)),), 1)
        model = init_model(spec, int(rng.integers(1 << 30)))
        model.b[0][...] = rng.normal(0, 0.3, model.b[0].shape)
        model.c[...] = rng.normal(0, 0.3, 1)
        seq = rng.normal(size=(int(rng.integers(1, 9)), spec.input_dim))
        y = float(rng.normal())
        a, _ = bptt_gradients(model, seq, y)
        n = finite_diff_gradients(model, seq, y, 1e-5)
        worst = max(worst, *(gradient_mismatch(x, z, atol=1e-8) for x, z in zip(a.arrays(), n.arrays())))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 10.0
    criterion(f"4 BPTT vs central differences, {trials} models (1e-4 rel)", ok,
              f"worst {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_5_training_sanity(criterion):
    start = time.perf_counter()
    table = sine_ohlc(500)
    split = chronological_split(table)
    norm, _ = nz.fit_transform_table(nz.Method.MINMAX, table.columns(), slice(0, split.train_len))
    samples = window_arrays(np.column_stack([norm[f] for f in FEATURES]), norm["close"], 10)
    tr, va, te = split_samples(samples, split)
    model, hist = train(init_model(NetSpec(), 0), tr, va, TrainConfig(epochs=500, seed=0))
    test_mse = mse(predict(model, te), te.targets)
    elapsed = time.perf_counter() - start
    ok = test_mse < 1e-3 and hist.epochs_run <= 500 and elapsed < 60.0
    criterion("5 sine training sanity (test MSE < 1e-3)", ok,
              f"test MSE {test_mse:.2e} after {hist.epochs_run} epochs, {elapsed:.1f}s")
    assert ok


PAPER_SWEEP = ExperimentConfig(
    datasets=(DatasetSource("BSE", synth_seed=7, synth_n=493),
              DatasetSource("NYSE", synth_seed=8, synth_n=503)),
    methods=nz.ALL_METHODS,
    seeds=(0, 1, 2, 3, 4),
)


@pytest.mark.slow
def test_6_paper_ranking(criterion, tmp_path):
    start = time.perf_counter()
    report = run_experiment(PAPER_SWEEP)
    emit_report(report, tmp_path)
    elapsed = time.perf_counter() - start
    ok = True
    details = []
    for ds in ("BSE", "NYSE"):
        tanh = report.median_errors(ds, nz.Method.TANH)
        for rival in (nz.Method.MINMAX, nz.Method.ZSCORE):
            other = report.median_errors(ds, rival)
            ok &= tanh.mse < other.mse and tanh.mae < other.mae
            details.append(f"{ds} tanh {tanh.mse:.2e}/{tanh.mae:.2e} vs {rival.value} "
                           f"{other.mse:.2e}/{other.mae:.2e}")
    criterion("6 tanh estimator beats MinMax and ZScore (median of 5 seeds)", ok,
              "; ".join(details) + f"; {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_7_determinism(criterion, tmp_path):
    cfg = ExperimentConfig(
        datasets=(DatasetSource("BSE", synth_seed=7, synth_n=493),),
        methods=(nz.Method.MINMAX, nz.Method.TANH, nz.Method.SIGMOID),
        train=TrainConfig(epochs=30),
        seeds=(0, 1),
    )
    emit_report(run_experiment(cfg), tmp_path / "a")
    emit_report(run_experiment(cfg), tmp_path / "b")
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    ok = a == b
    criterion("7 identical config and seeds give byte-identical report.json", ok, f"{len(a)} bytes")
    assert ok
