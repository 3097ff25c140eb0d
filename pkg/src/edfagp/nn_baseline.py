"""Fully-connected regression network (z-128-64-32-z) trained with Adam, in numpy.

All weights and biases live in one flat parameter vector; per-layer arrays
are views into it, so Adam updates the whole network in a handful of
vectorized operations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .domain import (
    Dataset,
    GainSpectrum,
    InputSpectrum,
    NormalizationParams,
    apply_normalization,
    fit_normalization,
)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (128, 64, 32)
    learning_rate: float = 1e-3
    epochs: int = 2000
    batch_size: int = 32
    weight_init_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h <= 0 for h in self.hidden) or self.batch_size <= 0 or self.epochs < 0:
            raise ValueError(f"invalid MLP configuration: {self}")

    def layer_sizes(self, z: int) -> tuple[int, ...]:
        return (z, *self.hidden, z)


def n_parameters(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def unpack(theta: np.ndarray, sizes):
    """Split a flat parameter vector into ``[(W, b), ...]`` views."""
    layers, k = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        W = theta[k : k + a * b].reshape(a, b)
        k += a * b
        layers.append((W, theta[k : k + b]))
        k += b
    return layers


def init_parameters(sizes, seed: int) -> np.ndarray:
    """He-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    theta = np.zeros(n_parameters(sizes))
    for W, _ in unpack(theta, sizes):
        lim = np.sqrt(6.0 / W.shape[0])
        W[...] = rng.uniform(-lim, lim, size=W.shape)
    return theta


def forward(theta, sizes, X) -> np.ndarray:
    h = X
    layers = unpack(theta, sizes)
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
    W, b = layers[-1]
    return h @ W + b


def loss_and_grad(theta, sizes, X, T, mask):
    """Masked mean squared error and its gradient with respect to ``theta``.

    The mean runs over entries with ``mask`` set; masked entries contribute
    exactly zero to loss and gradient.
    """
    layers = unpack(theta, sizes)
    acts = [X]
    pre = []
    h = X
    for W, b in layers[:-1]:
        a = h @ W + b
        pre.append(a)
        h = np.maximum(a, 0.0)
        acts.append(h)
    W, b = layers[-1]
    out = h @ W + b
    n = max(mask.sum(), 1)
    diff = np.where(mask, out - T, 0.0)
    loss = float(np.sum(diff * diff) / n)

    grad = np.zeros_like(theta)
    glayers = unpack(grad, sizes)
    delta = 2.0 * diff / n
    for li in range(len(layers) - 1, -1, -1):
        gW, gb = glayers[li]
        gW[...] = acts[li].T @ delta
        gb[...] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ layers[li][0].T) * (pre[li - 1] > 0)
    return loss, grad


@dataclass(eq=False)
class MlpModel:
    sizes: tuple[int, ...]
    theta: np.ndarray
    norm: NormalizationParams
    target_norm: NormalizationParams
    losses: list[float] = field(default_factory=list, repr=False)

    @property
    def layers(self):
        return unpack(self.theta, self.sizes)

    def to_json(self, path=None) -> str:
        doc = {
            "sizes": list(self.sizes),
            "theta": self.theta.tolist(),
            "input_min": self.norm.min.tolist(),
            "input_max": self.norm.max.tolist(),
            "target_min": self.target_norm.min.tolist(),
            "target_max": self.target_norm.max.tolist(),
        }
        text = json.dumps(doc)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        doc = json.loads(text)
        return cls(
            tuple(doc["sizes"]),
            np.asarray(doc["theta"], dtype=float),
            NormalizationParams(doc["input_min"], doc["input_max"]),
            NormalizationParams(doc["target_min"], doc["target_max"]),
        )


def fit_target_normalization(train: Dataset) -> NormalizationParams:
    """Per-channel min/max of the valid targets; channels never valid fall back to the global valid range."""
    Y = np.where(train.valid, train.Y, np.nan)
    any_valid = train.valid.any(axis=0)
    if not any_valid.any():
        raise ValueError("training set has no valid target entry")
    with np.errstate(all="ignore"):
        lo = np.where(any_valid, np.nanmin(np.where(any_valid, Y, 0.0), axis=0), np.nanmin(Y))
        hi = np.where(any_valid, np.nanmax(np.where(any_valid, Y, 0.0), axis=0), np.nanmax(Y))
    return NormalizationParams(lo, hi)


def _scale_targets(tn: NormalizationParams, Y) -> np.ndarray:
    span = tn.max - tn.min
    return np.where(span == 0, 0.0, (Y - tn.min) / np.where(span == 0, 1.0, span))


def _unscale_targets(tn: NormalizationParams, T) -> np.ndarray:
    return tn.min + T * (tn.max - tn.min)


def train_mlp(train: Dataset, cfg: MlpConfig | None = None) -> MlpModel:
    """Train on min-max normalized inputs and targets, idle outputs masked out of the loss."""
    cfg = cfg or MlpConfig()
    if len(train) == 0:
        raise ValueError("cannot train on an empty dataset")
    sizes = cfg.layer_sizes(train.z)
    norm = fit_normalization(train)
    tnorm = fit_target_normalization(train)
    X = apply_normalization(norm, train.X)
    mask = train.valid
    T = np.where(mask, _scale_targets(tnorm, np.where(mask, train.Y, tnorm.min)), 0.0)

    theta = init_parameters(sizes, cfg.weight_init_seed)
    m_t = np.zeros_like(theta)
    v_t = np.zeros_like(theta)
    rng = np.random.default_rng([cfg.weight_init_seed, 1])
    m = len(train)
    bs = m if m < cfg.batch_size else cfg.batch_size
    b1, b2 = cfg.beta1, cfg.beta2
    step = 0
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(m)
        total = 0.0
        for start in range(0, m, bs):
            idx = order[start : start + bs]
            loss, g = loss_and_grad(theta, sizes, X[idx], T[idx], mask[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            step += 1
            m_t *= b1
            m_t += (1 - b1) * g
            v_t *= b2
            v_t += (1 - b2) * g * g
            lr = cfg.learning_rate * np.sqrt(1 - b2**step) / (1 - b1**step)
            theta -= lr * m_t / (np.sqrt(v_t) + cfg.eps)
            total += loss * len(idx)
        losses.append(total / m)
    return MlpModel(sizes, theta, norm, tnorm, losses)


def predict_mlp_batch(model: MlpModel, power_dbm) -> np.ndarray:
    X = apply_normalization(model.norm, np.atleast_2d(power_dbm))
    return _unscale_targets(model.target_norm, forward(model.theta, model.sizes, X))


def predict_mlp(model: MlpModel, x: InputSpectrum) -> GainSpectrum:
    return GainSpectrum(predict_mlp_batch(model, x.power_dbm[None, :])[0], x.occupancy)


def config_dict(cfg: MlpConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    return d
