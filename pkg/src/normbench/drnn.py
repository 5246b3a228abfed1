"""Stacked Elman-style recurrent network for sequence regression.

Each recurrent layer computes ``h_t = tanh(U x_t + W h_{t-1} + b)`` with a
zero initial state, layer ``l > 0`` taking layer ``l-1``'s states as its
input sequence. The readout ``o_t = V h_t + c`` (optionally softmaxed) uses
the top layer. The same parameters serve every time step.

Training is plain per-sample gradient descent on the squared error of the
final step's output, with gradients from full backpropagation through time.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import DivergenceError, NormbenchError, ShapeError
from .series_data import SampleSet


@dataclass(frozen=True)
class NetSpec:
    input_dim: int = 3
    hidden_dims: tuple[int, ...] = (20,)
    output_dim: int = 1
    activation: str = "tanh"
    output_mode: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.output_dim < 1 or not self.hidden_dims:
            raise ShapeError(f"invalid network dims {self}")
        if any(h < 1 for h in self.hidden_dims):
            raise ShapeError(f"hidden sizes must be >= 1, got {self.hidden_dims}")
        if self.activation != "tanh":
            raise NormbenchError(f"unsupported activation {self.activation!r}")
        if self.output_mode not in ("linear", "softmax"):
            raise NormbenchError(f"unknown output mode {self.output_mode!r}")

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_dims": list(self.hidden_dims),
                "output_dim": self.output_dim, "activation": self.activation,
                "output_mode": self.output_mode}

    @classmethod
    def from_dict(cls, d) -> "NetSpec":
        return cls(**{**d, "hidden_dims": tuple(d["hidden_dims"])})


@dataclass
class RnnModel:
    spec: NetSpec
    U: list[np.ndarray]
    W: list[np.ndarray]
    b: list[np.ndarray]
    V: np.ndarray
    c: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order ``U0 W0 b0 U1 ... V c``."""
        out = []
        for u, w, b in zip(self.U, self.W, self.b):
            out += [u, w, b]
        return out + [self.V, self.c]

    def names(self) -> list[str]:
        out = []
        for layer in range(len(self.U)):
            out += [f"U{layer}", f"W{layer}", f"b{layer}"]
        return out + ["V", "c"]

    def copy(self) -> "RnnModel":
        return copy.deepcopy(self)

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def to_dict(self) -> dict:
        """Checkpoint: spec plus row-major flattened parameters."""
        return {"spec": self.spec.to_dict(),
                "params": {n: a.ravel().tolist() for n, a in zip(self.names(), self.arrays())}}

    @classmethod
    def from_dict(cls, d) -> "RnnModel":
        spec = NetSpec.from_dict(d["spec"])
        model = zeros_model(spec)
        for name, arr in zip(model.names(), model.arrays()):
            flat = np.asarray(d["params"][name], dtype=np.float64)
            if flat.size != arr.size:
                raise ShapeError(f"checkpoint entry {name} has {flat.size} values, expected {arr.size}")
            arr[...] = flat.reshape(arr.shape)
        return model


@dataclass
class Gradients:
    """Same layout as :class:`RnnModel`'s parameters."""

    U: list[np.ndarray]
    W: list[np.ndarray]
    b: list[np.ndarray]
    V: np.ndarray
    c: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out = []
        for u, w, b in zip(self.U, self.W, self.b):
            out += [u, w, b]
        return out + [self.V, self.c]

    @classmethod
    def like(cls, model: RnnModel) -> "Gradients":
        return cls([np.zeros_like(u) for u in model.U], [np.zeros_like(w) for w in model.W],
                   [np.zeros_like(b) for b in model.b], np.zeros_like(model.V), np.zeros_like(model.c))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    seed: int = 0
    shuffle: bool = True
    early_stop_patience: int | None = 25

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise NormbenchError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise NormbenchError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "epochs": self.epochs, "seed": self.seed,
                "shuffle": self.shuffle, "early_stop_patience": self.early_stop_patience}


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    initial_train_loss: float = float("nan")
    initial_val_loss: float = float("nan")

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {"epochs_run": self.epochs_run, "best_epoch": self.best_epoch,
                "best_val_loss": self.best_val_loss,
                "initial_train_loss": self.initial_train_loss,
                "initial_val_loss": self.initial_val_loss,
                "train_loss": list(self.train_loss), "val_loss": list(self.val_loss)}


def _layer_inputs(spec: NetSpec) -> list[int]:
    return [spec.input_dim, *spec.hidden_dims[:-1]]


def zeros_model(spec: NetSpec) -> RnnModel:
    return RnnModel(
        spec,
        [np.zeros((h, i)) for h, i in zip(spec.hidden_dims, _layer_inputs(spec))],
        [np.zeros((h, h)) for h in spec.hidden_dims],
        [np.zeros(h) for h in spec.hidden_dims],
        np.zeros((spec.output_dim, spec.hidden_dims[-1])),
        np.zeros(spec.output_dim),
    )


def init_model(spec: NetSpec, seed: int = 0) -> RnnModel:
    """Uniform ``[-s, s]`` weights with ``s = sqrt(1 / fan_in)``, zero biases."""
    rng = np.random.default_rng(seed)
    model = zeros_model(spec)
    for mat in [*model.U, *model.W, model.V]:
        s = np.sqrt(1.0 / mat.shape[1])
        mat[...] = rng.uniform(-s, s, mat.shape)
    return model


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_sequence(model: RnnModel, seq) -> np.ndarray:
    x = np.asarray(seq, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"sequence must be a non-empty (steps, features) block, got shape {x.shape}")
    if x.shape[1] != model.spec.input_dim:
        raise ShapeError(f"sequence has {x.shape[1]} features, model expects {model.spec.input_dim}")
    return x


def forward(model: RnnModel, sequence):
    """Run one sequence.

    Returns ``(outputs, states)``: ``outputs`` is ``(steps, output_dim)``
    and ``states[l]`` is ``(steps + 1, hidden_dims[l])`` with the zero
    initial state in row 0.
    """
    x = _check_sequence(model, sequence)
    steps = x.shape[0]
    states = []
    inp = x
    for U, W, b in zip(model.U, model.W, model.b):
        drive = inp @ U.T + b
        h = np.zeros((steps + 1, W.shape[0]))
        for t in range(steps):
            h[t + 1] = np.tanh(drive[t] + W @ h[t])
        states.append(h)
        inp = h[1:]
    out = inp @ model.V.T + model.c
    if model.spec.output_mode == "softmax":
        out = _softmax(out)
    return out, states


def _final_loss(pred: np.ndarray, target) -> float:
    r = pred - target
    return float(np.mean(r * r))


def loss(model: RnnModel, sequence, target) -> float:
    out, _ = forward(model, sequence)
    return _final_loss(out[-1], target)


def bptt_gradients(model: RnnModel, sequence, target):
    """Exact gradients of the final-step squared error, ``mean((o_T - y)^2)``.

    Returns ``(Gradients, loss)``. Only the linear readout is supported.
    """
    if model.spec.output_mode != "linear":
        raise NormbenchError("BPTT is implemented for the linear readout only")
    x = _check_sequence(model, sequence)
    out, states = forward(model, x)
    resid = out[-1] - target
    grads = Gradients.like(model)

    d_out = 2.0 * resid / model.spec.output_dim
    top = states[-1]
    grads.V[...] = np.outer(d_out, top[-1])
    grads.c[...] = d_out

    steps = x.shape[0]
    # gradient arriving at each step's top-layer state from above
    d_above = np.zeros((steps, top.shape[1]))
    d_above[-1] = model.V.T @ d_out
    layers = len(model.U)
    for layer in reversed(range(layers)):
        h = states[layer]
        inp = x if layer == 0 else states[layer - 1][1:]
        W = model.W[layer]
        d_pre = np.zeros_like(d_above)
        carry = np.zeros(W.shape[0])
        one_minus = 1.0 - h[1:] ** 2
        for t in reversed(range(steps)):
            da = (d_above[t] + carry) * one_minus[t]
            d_pre[t] = da
            carry = W.T @ da
        grads.U[layer][...] = d_pre.T @ inp
        grads.W[layer][...] = d_pre.T @ h[:-1]
        grads.b[layer][...] = d_pre.sum(axis=0)
        if layer:
            d_above = d_pre @ model.U[layer]
    return grads, _final_loss(out[-1], target)


def finite_diff_gradients(model: RnnModel, sequence, target, epsilon: float = 1e-5,
                          loss_fn: Callable | None = None) -> Gradients:
    """Central-difference estimate of every parameter's gradient."""
    if not epsilon > 0:
        raise NormbenchError("epsilon must be positive")
    loss_fn = loss_fn or loss
    probe = model.copy()
    grads = Gradients.like(model)
    for arr, g in zip(probe.arrays(), grads.arrays()):
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + epsilon
            up = loss_fn(probe, sequence, target)
            flat[i] = keep - epsilon
            down = loss_fn(probe, sequence, target)
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * epsilon)
    return grads


def forward_batch(model: RnnModel, inputs: np.ndarray) -> np.ndarray:
    """Final-step outputs for a ``(n, steps, input_dim)`` block."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != model.spec.input_dim:
        raise ShapeError(f"inputs of shape {x.shape} do not match input_dim {model.spec.input_dim}")
    n, steps, _ = x.shape
    seq = x
    for U, W, b in zip(model.U, model.W, model.b):
        drive = seq @ U.T + b
        h = np.zeros((n, W.shape[0]))
        hs = np.empty((n, steps, W.shape[0]))
        for t in range(steps):
            h = np.tanh(drive[:, t] + h @ W.T)
            hs[:, t] = h
        seq = hs
    out = seq[:, -1] @ model.V.T + model.c
    if model.spec.output_mode == "softmax":
        out = _softmax(out)
    return out


def predict(model: RnnModel, samples: SampleSet) -> np.ndarray:
    """One prediction per sample: the first output unit at the final step."""
    if len(samples) == 0:
        return np.zeros(0)
    return forward_batch(model, samples.inputs)[:, 0]


def evaluate_loss(model: RnnModel, samples: SampleSet) -> float:
    r = predict(model, samples) - samples.targets
    return float(np.mean(r * r))


def _sgd_step(model: RnnModel, grads: Gradients, lr: float) -> None:
    for p, g in zip(model.arrays(), grads.arrays()):
        p -= lr * g


def train(model: RnnModel, train_set: SampleSet, val_set: SampleSet, cfg: TrainConfig):
    """Per-sample gradient descent with early stopping on validation loss.

    Returns ``(best_model, history)``; ``model`` itself is left untouched.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise NormbenchError("training and validation sets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    work = model.copy()
    best = model.copy()
    hist = TrainHistory()
    hist.initial_train_loss = evaluate_loss(work, train_set)
    hist.initial_val_loss = evaluate_loss(work, val_set)
    hist.best_val_loss = hist.initial_val_loss
    if not np.isfinite(hist.best_val_loss):
        hist.best_val_loss = float("inf")
    stale = 0
    n = len(train_set)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else range(n)
        for i in order:
            grads, sample_loss = bptt_gradients(work, train_set.inputs[i], train_set.targets[i])
            if not np.isfinite(sample_loss):
                raise DivergenceError(epoch)
            _sgd_step(work, grads, cfg.learning_rate)
        tr = evaluate_loss(work, train_set)
        va = evaluate_loss(work, val_set)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise DivergenceError(epoch)
        hist.train_loss.append(tr)
        hist.val_loss.append(va)
        if va < hist.best_val_loss:
            hist.best_val_loss = va
            hist.best_epoch = epoch
            best = work.copy()
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience is not None and stale >= cfg.early_stop_patience:
                break
    return best, hist
