"""Self-check suites behind the ``gradcheck`` and ``normcheck`` commands.

The normalizer oracle below evaluates each formula with scalar ``math``
calls and shares no code with :mod:`normbench.normalizers`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import normalizers as nz
from .drnn import NetSpec, bptt_gradients, finite_diff_gradients, init_model


@dataclass
class CheckResult:
    name: str
    worst: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: worst {self.worst:.3e} <= {self.tolerance:.0e}{extra}"


def gradient_mismatch(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-8) -> float:
    """Worst relative error; entries below ``atol`` must agree absolutely (else inf)."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = np.maximum(np.abs(a), np.abs(n))
    diff = np.abs(a - n)
    small = scale < atol
    rel = np.where(small, 0.0, diff / np.where(small, 1.0, scale))
    ok_abs = np.all(diff[small] <= atol)
    return float(rel.max(initial=0.0)) if ok_abs else float("inf")


def random_model(rng: np.random.Generator, max_input=3, max_hidden=8, max_layers=2, output_dim=1):
    spec = NetSpec(
        input_dim=int(rng.integers(1, max_input + 1)),
        hidden_dims=tuple(int(h) for h in rng.integers(1, max_hidden + 1, rng.integers(1, max_layers + 1))),
        output_dim=output_dim,
    )
    model = init_model(spec, int(rng.integers(2**31)))
    for b in [*model.b, model.c]:
        b[...] = rng.normal(0.0, 0.3, b.shape)
    return model


def run_gradcheck(trials: int = 20, epsilon: float = 1e-5, rtol: float = 1e-4, atol: float = 1e-8,
                  seed: int = 0, max_window: int = 8) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for k in range(trials):
        model = random_model(rng)
        steps = int(rng.integers(1, max_window + 1))
        seq = rng.normal(0.0, 1.0, (steps, model.spec.input_dim))
        target = float(rng.normal())
        analytic, _ = bptt_gradients(model, seq, target)
        numeric = finite_diff_gradients(model, seq, target, epsilon)
        worst = max(gradient_mismatch(a, n, atol) for a, n in zip(analytic.arrays(), numeric.arrays()))
        dims = (model.spec.input_dim, *model.spec.hidden_dims, model.spec.output_dim)
        results.append(CheckResult(f"bptt trial {k}", worst, rtol, f"dims={dims} window={steps}"))
    return results


def oracle_transform(p: nz.ScalerParams, x: float) -> float:
    m = p.method
    if m is nz.Method.MINMAX:
        return p.low + (p.high - p.low) * (x - p.min_x) / (p.max_x - p.min_x)
    if m is nz.Method.DECIMAL:
        return x / math.pow(10, p.d)
    if m is nz.Method.ZSCORE:
        return (x - p.mu) / p.sigma
    if m is nz.Method.MEDIAN:
        return x / p.median_x
    if m is nz.Method.SIGMOID:
        return 1.0 / (1.0 + math.exp(-x))
    return 0.5 * (math.tanh(0.01 * (x - p.mu) / p.sigma) + 1.0)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(np.abs(a), np.abs(b))
    scale = np.where(scale == 0, 1.0, scale)
    return float(np.max(np.abs(a - b) / scale))


def _fit_column(rng, method):
    if method is nz.Method.SIGMOID:
        return rng.uniform(-10, 10, 200)
    return rng.uniform(1000.0, 30000.0, 200)


def _probe_inputs(rng, method, n):
    if method is nz.Method.SIGMOID:
        # past ~+15 the logit of a float64 sigmoid loses relative accuracy
        return rng.uniform(-10.0, 10.0, n)
    return rng.uniform(500.0, 40000.0, n)


def run_normcheck(samples: int = 1000, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    configs = [(m, {}) for m in nz.ALL_METHODS] + [(nz.Method.MINMAX, {"low": -1.0, "high": 1.0})]
    for method, kw in configs:
        label = method.label + (f" [{kw['low']:g},{kw['high']:g}]" if kw else "")
        params = nz.fit(method, _fit_column(rng, method), **kw)
        x = _probe_inputs(rng, method, samples)
        if not kw:
            expected = np.array([oracle_transform(params, float(v)) for v in x])
            results.append(CheckResult(f"oracle {label}", _rel(nz.transform(params, x), expected), 1e-12))
        back = nz.inverse(params, nz.transform(params, x))
        results.append(CheckResult(f"round-trip {label}", _rel(back, x), 1e-9))
    return results
