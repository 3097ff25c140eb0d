"""Multi-output Gaussian-process regression with a pluggable mean function.

All output channels share one squared-exponential kernel over the
normalized input features, hence one Cholesky factor and one predictive
variance per query. The GP is fitted to the residual ``Y - m(X)``; idle
(invalid) target entries get residual 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

from .domain import (
    Dataset,
    GainSpectrum,
    InputSpectrum,
    NormalizationParams,
    apply_normalization,
    fit_normalization,
)
from .physics_prior import ZeroMean

log = logging.getLogger(__name__)

_LOG_2PI = np.log(2 * np.pi)


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float = 1.0
    length_scale: float = 1.0
    noise_variance: float = 1e-4

    def __post_init__(self):
        if not (self.signal_variance > 0 and self.length_scale > 0):
            raise ValueError(f"kernel amplitude and length-scale must be > 0: {self}")
        if not self.noise_variance >= 0:
            raise ValueError(f"noise variance must be >= 0: {self}")

    @property
    def log_theta(self) -> np.ndarray:
        return np.log([self.signal_variance, self.length_scale, self.noise_variance])

    @classmethod
    def from_log(cls, theta) -> "KernelParams":
        sf2, ell, sn2 = np.exp(np.asarray(theta, dtype=float))
        return cls(float(sf2), float(ell), float(sn2))

    def to_dict(self) -> dict:
        return {
            "signal_variance": self.signal_variance,
            "length_scale": self.length_scale,
            "noise_variance": self.noise_variance,
        }


@dataclass(frozen=True)
class GprConfig:
    """Numerical settings for fitting.

    ``jitter`` and ``max_jitter`` are relative to the mean diagonal of the
    kernel matrix; jitter grows tenfold per failed factorization.
    """

    jitter: float = 1e-10
    max_jitter: float = 1e-4
    optimize: bool = True
    restarts: int = 4
    max_iter: int = 200
    seed: int = 0
    warm_start: bool = True
    log_signal_variance_bounds: tuple[float, float] = (np.log(1e-8), np.log(1e4))
    log_length_scale_bounds: tuple[float, float] = (np.log(1e-2), np.log(1e3))
    log_noise_variance_bounds: tuple[float, float] = (np.log(1e-8), np.log(1e2))

    @property
    def bounds(self):
        return [
            tuple(self.log_signal_variance_bounds),
            tuple(self.log_length_scale_bounds),
            tuple(self.log_noise_variance_bounds),
        ]


def sq_dist(A, B) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def kernel(a, b, p: KernelParams) -> float:
    """Squared-exponential covariance between two feature vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"feature length mismatch: {a.shape} vs {b.shape}")
    d2 = float(np.sum((a - b) ** 2))
    return p.signal_variance * np.exp(-0.5 * d2 / p.length_scale**2)


def kernel_matrix(A, B, p: KernelParams) -> np.ndarray:
    return p.signal_variance * np.exp(-0.5 * sq_dist(A, B) / p.length_scale**2)


def _cholesky(K: np.ndarray, cfg: GprConfig):
    """Cholesky of ``K`` with escalating diagonal jitter. Returns ``(L, jitter)``."""
    scale = float(np.mean(np.diag(K)))
    levels = [0.0] if cfg.jitter == 0 else []
    rel = cfg.jitter if cfg.jitter > 0 else 1e-10
    while rel <= cfg.max_jitter * (1 + 1e-9):
        levels.append(rel * scale)
        rel *= 10
    eye = np.eye(K.shape[0])
    for jit in levels:
        try:
            return linalg.cholesky(K + jit * eye, lower=True, check_finite=False), jit
        except linalg.LinAlgError:
            continue
    cond = np.linalg.cond(K)
    raise FactorizationError(
        f"kernel matrix not positive definite after jitter {levels[-1]:.3g} (condition number {cond:.3g})"
    )


@dataclass(frozen=True, eq=False)
class GprModel:
    X_train: np.ndarray
    Y_resid: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    params: KernelParams
    prior: object
    norm: NormalizationParams
    jitter: float = 0.0
    lml: float = field(default=np.nan)

    @property
    def m(self) -> int:
        return self.X_train.shape[0]


@dataclass(frozen=True)
class Posterior:
    mean: GainSpectrum
    variance: float


def _lml_terms(Xn, R, params: KernelParams, jitter: float, D=None):
    if D is None:
        D = sq_dist(Xn, Xn)
    m, z = R.shape
    Kse = params.signal_variance * np.exp(-0.5 * D / params.length_scale**2)
    K = Kse + (params.noise_variance + jitter) * np.eye(m)
    L = linalg.cholesky(K, lower=True, check_finite=False)
    alpha = linalg.cho_solve((L, True), R, check_finite=False)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    value = -0.5 * np.sum(R * alpha) - 0.5 * z * logdet - 0.5 * m * z * _LOG_2PI
    Kinv = linalg.cho_solve((L, True), np.eye(m), check_finite=False)
    W = alpha @ alpha.T - z * Kinv
    grad = 0.5 * np.array(
        [
            np.sum(W * Kse),
            np.sum(W * Kse * D) / params.length_scale**2,
            params.noise_variance * np.trace(W),
        ]
    )
    return value, grad


def log_marginal_likelihood(model: GprModel):
    """Summed log marginal likelihood over output columns and its gradient.

    The gradient is taken with respect to ``(log signal_variance,
    log length_scale, log noise_variance)`` holding the jitter fixed.
    """
    return _lml_terms(model.X_train, model.Y_resid, model.params, model.jitter)


def default_start(R) -> KernelParams:
    v = float(np.var(R))
    return KernelParams(v if v > 0 else 1.0, 1.0, 1e-4)


def optimize_hyperparameters(Xn, R, cfg: GprConfig, start: KernelParams | None = None) -> KernelParams:
    """Multi-start L-BFGS-B ascent of the log marginal likelihood in log space."""
    D = sq_dist(Xn, Xn)
    bounds = cfg.bounds
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    base = default_start(R)
    starts = [base.log_theta]
    if start is not None and cfg.warm_start:
        starts.append(start.log_theta)
    rng = np.random.default_rng([cfg.seed, Xn.shape[0]])
    for _ in range(cfg.restarts):
        starts.append(
            base.log_theta + np.array([rng.uniform(-2.3, 2.3), rng.uniform(-1.2, 3.4), rng.uniform(-4.6, 4.6)])
        )

    def objective(theta):
        try:
            p = KernelParams.from_log(theta)
            jit = cfg.jitter * (p.signal_variance + p.noise_variance)
            v, g = _lml_terms(Xn, R, p, jit, D)
        except (linalg.LinAlgError, ValueError, FloatingPointError):
            return 1e25, np.zeros(3)
        if not np.isfinite(v):
            return 1e25, np.zeros(3)
        return -v, -g

    best_val, best_theta = np.inf, None
    for s in starts:
        s = np.clip(s, lo, hi)
        res = optimize.minimize(
            objective,
            s,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.max_iter},
        )
        if res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None or best_val >= 1e25:
        log.warning("hyperparameter optimization failed at every start; keeping initial values")
        return start if start is not None else base
    return KernelParams.from_log(best_theta)


def residual_targets(train: Dataset, prior) -> np.ndarray:
    M = prior.batch(train.X, train.occupancy)
    return np.where(train.valid, train.Y - M, 0.0)


def fit(
    train: Dataset,
    prior=None,
    params: KernelParams | None = None,
    optimize: bool = False,
    config: GprConfig | None = None,
    norm: NormalizationParams | None = None,
) -> GprModel:
    """Fit the GP to ``train``.

    ``params`` are used as-is when ``optimize`` is false, and as an extra
    warm start for the likelihood search otherwise.
    """
    if len(train) == 0:
        raise ValueError("cannot fit a GP on an empty dataset")
    cfg = config or GprConfig()
    prior = prior if prior is not None else ZeroMean()
    norm = norm or fit_normalization(train)
    Xn = apply_normalization(norm, train.X)
    R = residual_targets(train, prior)
    if optimize:
        params = optimize_hyperparameters(Xn, R, cfg, params)
    elif params is None:
        params = default_start(R)
    K = kernel_matrix(Xn, Xn, params) + params.noise_variance * np.eye(len(train))
    L, jit = _cholesky(K, cfg)
    alpha = linalg.cho_solve((L, True), R, check_finite=False)
    model = GprModel(Xn, R, L, alpha, params, prior, norm, jit)
    lml, _ = log_marginal_likelihood(model)
    return replace(model, lml=float(lml))


def _features(model: GprModel, power_dbm):
    return apply_normalization(model.norm, np.atleast_2d(power_dbm))


def posterior_variance(model: GprModel, power_dbm, clamp: bool = True) -> np.ndarray:
    """Latent predictive variance for a batch of raw input powers."""
    Xs = _features(model, power_dbm)
    Ks = kernel_matrix(Xs, model.X_train, model.params)
    v = linalg.solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = model.params.signal_variance - np.sum(v * v, axis=0)
    return np.maximum(var, 0.0) if clamp else var


def predict_batch(model: GprModel, power_dbm, occupancy):
    """Posterior means ``(n, z)`` and variances ``(n,)`` for a batch of inputs."""
    power_dbm = np.atleast_2d(power_dbm)
    occupancy = np.atleast_2d(occupancy)
    if power_dbm.shape[1] != model.X_train.shape[1]:
        raise ValueError(f"input has {power_dbm.shape[1]} channels, model expects {model.X_train.shape[1]}")
    Xs = _features(model, power_dbm)
    Ks = kernel_matrix(Xs, model.X_train, model.params)
    mean = model.prior.batch(power_dbm, occupancy) + Ks @ model.alpha
    v = linalg.solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = np.maximum(model.params.signal_variance - np.sum(v * v, axis=0), 0.0)
    return mean, var


def predict(model: GprModel, x: InputSpectrum) -> Posterior:
    mean, var = predict_batch(model, x.power_dbm[None, :], x.occupancy[None, :])
    return Posterior(GainSpectrum(mean[0], x.occupancy), float(var[0]))
