"""Small feedforward token classifier with analytic gradients.

Backbone: dense layers with tanh hidden activations and either a softmax
head over k+1 classes or a scalar sigmoid head.  Gradients of any of the
empirical risk estimators are computed exactly by backpropagation; the
clamped max{0, .} terms contribute subgradient 0 on the clamped branch.

Parameter file layout (little-endian, documented for interoperability):

    offset  size  field
    0       4     magic b"CMPU"
    4       4     uint32 format version (currently 1)
    8       1     uint8 head: 0 = softmax, 1 = sigmoid
    9       4     uint32 number of layers L
    13      8*L   per layer: uint32 d_in, uint32 d_out
    then, per layer in order: W as d_in*d_out float64 (row-major), b as
    d_out float64.  Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import risk as risk_mod
from .risk import Batch, RiskConfig

_MAGIC = b"CMPU"
_VERSION = 1
_HEADS = ("softmax", "sigmoid")


class NumericError(ArithmeticError):
    """Non-finite value encountered during forward or backward pass."""


@dataclass(frozen=True)
class ModelParams:
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]  # (W: (d_in, d_out), b: (d_out,))
    head: str  # "softmax" | "sigmoid"

    def __post_init__(self):
        if self.head not in _HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        prev = None
        for w, b in self.layers:
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError("layer shape mismatch")
            if prev is not None and w.shape[0] != prev:
                raise ValueError("consecutive layer dimensions disagree")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("parameters must be finite")
            prev = w.shape[1]
        if self.head == "sigmoid" and self.layers[-1][0].shape[1] != 1:
            raise ValueError("sigmoid head requires output dimension 1")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[1]


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray


Grads = list[tuple[np.ndarray, np.ndarray]]


def init_params(dims: Sequence[int], head: str, seed: int) -> ModelParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded."""
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        w = rng.uniform(-bound, bound, size=(d_in, d_out))
        b = rng.uniform(-bound, bound, size=d_out)
        layers.append((w, b))
    return ModelParams(layers=tuple(layers), head=head)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cached(params: ModelParams, x: np.ndarray):
    """Returns (probs, hidden activations incl. input) for backprop."""
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(
            f"input dim {x.shape[-1] if x.ndim else '?'} does not match model "
            f"({params.input_dim})"
        )
    acts = [x]
    a = x
    for w, b in params.layers[:-1]:
        a = np.tanh(a @ w + b)
        acts.append(a)
    w, b = params.layers[-1]
    z = a @ w + b
    if not np.isfinite(z).all():
        raise NumericError("non-finite pre-activation in forward pass")
    if params.head == "softmax":
        probs = _softmax(z)
    else:
        probs = 1.0 / (1.0 + np.exp(-z[:, 0]))
    return probs, acts


def forward_batch(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """(n, k+1) softmax probabilities or (n,) sigmoid probabilities."""
    probs, _ = _forward_cached(params, np.asarray(x, dtype=np.float64))
    return probs


def predictor(params: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: forward_batch(params, x)


def forward(params: ModelParams, x: np.ndarray) -> Prediction:
    """Single-vector forward pass."""
    probs = forward_batch(params, np.asarray(x, dtype=np.float64)[None, :])
    return Prediction(probs=np.atleast_1d(probs[0]))


def mae_loss(pred: Prediction | np.ndarray, y: int) -> float:
    """Bounded mean absolute error against the one-hot label y in 0..k.

    l(f(x), y) = (1/(k+1)) * sum_c |y_c - f(x)_c|, which lies in
    [0, 2/(k+1)] for probability vectors.
    """
    probs = np.asarray(getattr(pred, "probs", pred), dtype=np.float64)
    if probs.ndim != 1:
        raise ValueError("mae_loss scores a single prediction; use risk for batches")
    if not 0 <= y < probs.shape[0]:
        raise ValueError(f"label {y} out of range for {probs.shape[0]} outputs")
    onehot = np.zeros_like(probs)
    onehot[y] = 1.0
    return float(np.abs(onehot - probs).sum() / probs.shape[0])


def _backprop(params: ModelParams, acts: list[np.ndarray], dz: np.ndarray) -> Grads:
    grads: Grads = [None] * len(params.layers)  # type: ignore[list-item]
    for li in range(len(params.layers) - 1, -1, -1):
        a_prev = acts[li]
        grads[li] = (a_prev.T @ dz, dz.sum(axis=0))
        if li > 0:
            w, _ = params.layers[li]
            da = dz @ w.T
            dz = da * (1.0 - acts[li] ** 2)  # through tanh
    return grads


def _zero_grads(params: ModelParams) -> Grads:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]


def risk_and_grad(
    params: ModelParams,
    batch: Batch,
    cfg: RiskConfig,
    allow_empty: bool = False,
) -> tuple[float, Grads]:
    """Empirical risk on the batch and its exact gradient w.r.t. params.

    The risk estimator supplies d(risk)/d(loss term) per sample; MAE and
    the network are differentiated analytically.  Raises NumericError on
    non-finite intermediates.
    """
    k = cfg.num_classes
    if params.head == "sigmoid" and k != 1:
        raise ValueError("sigmoid head supports a single positive class")
    if params.head == "softmax" and params.output_dim != k + 1:
        raise ValueError(
            f"softmax head has {params.output_dim} outputs but config declares k={k}"
        )
    groups: list[tuple[np.ndarray, int]] = []  # (X, class id or -1 for unlabeled)
    for i, x in enumerate(batch.positives, start=1):
        groups.append((np.asarray(x, dtype=np.float64), i))
    groups.append((np.asarray(batch.unlabeled, dtype=np.float64), -1))
    sizes = [len(x) for x, _ in groups]
    if sum(sizes) == 0:
        raise ValueError("batch is empty")
    dim = params.input_dim
    x_all = np.concatenate(
        [x.reshape(len(x), dim) for x, _ in groups if len(x)], axis=0
    )
    probs, acts = _forward_cached(params, x_all)

    # slice per group, compute losses
    offsets = np.cumsum([0] + [s for s in sizes])
    pos_probs = []
    idx = 0
    slices = []
    for s in sizes:
        lo = offsets[idx]
        slices.append((lo, lo + s))
        idx += 1
    unl_slice = slices[-1]
    for (lo, hi), (_, cid) in zip(slices[:-1], groups[:-1]):
        pos_probs.append(probs[lo:hi] if hi > lo else None)
    unl_probs = probs[unl_slice[0]:unl_slice[1]] if unl_slice[1] > unl_slice[0] else None
    losses = risk_mod._losses_from_probs(pos_probs, unl_probs)
    value, weights = risk_mod.value_and_weights(cfg, losses, batch, allow_empty)

    # d(risk)/d(probs): each sample contributes w_pos * dl(p, class)/dp
    # + w_zero * dl(p, 0)/dp, with dl/dp_c = sign(p_c - y_c)/(k+1).
    if params.head == "softmax":
        n_out = params.output_dim
        g = np.zeros_like(probs)
        for i in range(k):
            lo, hi = slices[i]
            if hi == lo:
                continue
            block = probs[lo:hi]
            sign_i = np.sign(block - _onehot_row(i + 1, n_out))
            sign_0 = np.sign(block - _onehot_row(0, n_out))
            g[lo:hi] = (
                weights.pos[i][:, None] * sign_i + weights.pos0[i][:, None] * sign_0
            ) / n_out
        lo, hi = unl_slice
        if hi > lo:
            sign_0 = np.sign(probs[lo:hi] - _onehot_row(0, n_out))
            g[lo:hi] = weights.unl0[:, None] * sign_0 / n_out
        dz = probs * (g - (g * probs).sum(axis=1, keepdims=True))
    else:
        # sigmoid scalar p scored as (1-p, p): dl(p,1)/dp = -1, dl(p,0)/dp = +1
        g = np.zeros_like(probs)
        for i in range(k):
            lo, hi = slices[i]
            if hi > lo:
                g[lo:hi] = -weights.pos[i] + weights.pos0[i]
        lo, hi = unl_slice
        if hi > lo:
            g[lo:hi] = weights.unl0
        dz = (probs * (1.0 - probs) * g)[:, None]

    grads = _backprop(params, acts, dz)
    for dw, db in grads:
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise NumericError("non-finite gradient")
    return value, grads


def _onehot_row(y: int, n: int) -> np.ndarray:
    row = np.zeros(n)
    row[y] = 1.0
    return row


def grad(params: ModelParams, batch: Batch, cfg: RiskConfig, allow_empty: bool = False) -> Grads:
    """Gradient of the chosen empirical risk w.r.t. all parameters."""
    return risk_and_grad(params, batch, cfg, allow_empty)[1]


def sgd_step(params: ModelParams, grads: Grads, lr: float) -> ModelParams:
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    layers = tuple(
        (w - lr * dw, b - lr * db)
        for (w, b), (dw, db) in zip(params.layers, grads)
    )
    return ModelParams(layers=layers, head=params.head)


class SGD:
    """Plain SGD with optional classical momentum."""

    def __init__(self, lr: float, momentum: float = 0.0):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        self.lr = lr
        self.momentum = momentum
        self._velocity: Grads | None = None

    def step(self, params: ModelParams, grads: Grads) -> ModelParams:
        if self.momentum == 0.0:
            return sgd_step(params, grads, self.lr)
        if self._velocity is None:
            self._velocity = _zero_grads(params)
        self._velocity = [
            (self.momentum * vw + dw, self.momentum * vb + db)
            for (vw, vb), (dw, db) in zip(self._velocity, grads)
        ]
        return sgd_step(params, self._velocity, self.lr)


def save_params(params: ModelParams, path: str | Path) -> None:
    parts = [struct.pack("<4sIBI", _MAGIC, _VERSION,
                         _HEADS.index(params.head), len(params.layers))]
    for w, _b in params.layers:
        parts.append(struct.pack("<II", w.shape[0], w.shape[1]))
    for w, b in params.layers:
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_params(path: str | Path) -> ModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < 13 or raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not a parameter file (bad magic)")
    version, head_id, n_layers = struct.unpack("<IBI", raw[4:13])
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    if head_id >= len(_HEADS):
        raise ValueError(f"{path}: unknown head id {head_id}")
    off = 13
    shapes = []
    for _ in range(n_layers):
        d_in, d_out = struct.unpack("<II", raw[off:off + 8])
        shapes.append((d_in, d_out))
        off += 8
    layers = []
    for d_in, d_out in shapes:
        w = np.frombuffer(raw, dtype="<f8", count=d_in * d_out, offset=off)
        off += 8 * d_in * d_out
        b = np.frombuffer(raw, dtype="<f8", count=d_out, offset=off)
        off += 8 * d_out
        layers.append((w.reshape(d_in, d_out).copy(), b.copy()))
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes in parameter file")
    return ModelParams(layers=tuple(layers), head=_HEADS[head_id])
