"""Phenomenological EDFA under automatic gain control, used as a measurement oracle.

The gain of occupied channel ``i`` before AGC is::

    ripple[i] + tilt * (P_total - P_ref) * u[i] + coupling * loading[i]

where ``u`` runs linearly from -1 (first active channel) to +1 (last) and
``loading[i]`` is the fraction of the nearest active neighbours of ``i``
that are idle. AGC then shifts the whole spectrum so the mean gain over the
occupied channels equals the target, and per-channel Gaussian measurement
noise is added on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import BASE_POWER_DBM, ChannelGrid, GainSpectrum, InputSpectrum

#: Number of repeated draws averaged for the fully-loaded calibration.
CALIBRATION_DRAWS = 16

_CALIBRATION_TAG = 1 << 20


@dataclass(frozen=True)
class SimulatorConfig:
    target_gain_db: float = 16.0
    ripple_amplitude_db: float = 0.4
    tilt_coeff_db_per_db: float = 0.08
    coupling_coeff_db: float = 0.15
    noise_sigma_db: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma_db < 0:
            raise ValueError("noise_sigma_db must be >= 0")
        if self.target_gain_db <= 0:
            raise ValueError("target_gain_db must be > 0")


def ripple_profile(cfg: SimulatorConfig, z: int) -> np.ndarray:
    """Hidden gain ripple: a seeded sum of three sinusoids with the given peak amplitude."""
    if cfg.ripple_amplitude_db == 0 or z == 0:
        return np.zeros(z)
    rng = np.random.default_rng([cfg.seed, 0xE1])
    u = np.linspace(0.0, 1.0, z)
    freqs = rng.uniform(0.5, 3.0, size=3)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)
    weights = rng.uniform(0.3, 1.0, size=3)
    r = (weights[:, None] * np.sin(2 * np.pi * freqs[:, None] * u + phases[:, None])).sum(axis=0)
    peak = np.abs(r).max()
    if peak == 0:
        return np.zeros(z)
    return cfg.ripple_amplitude_db * r / peak


def loading_term(occupancy: np.ndarray) -> np.ndarray:
    """Fraction of each channel's nearest active-grid neighbours that are idle.

    Works on a single occupancy vector or an ``(n, z)`` batch. Edge channels
    have a single neighbour.
    """
    occ = np.asarray(occupancy, dtype=bool)
    idle = (~occ).astype(float)
    z = occ.shape[-1]
    if z == 1:
        return np.zeros(occ.shape)
    total = np.zeros(occ.shape)
    count = np.zeros(z)
    total[..., 1:] += idle[..., :-1]
    count[1:] += 1
    total[..., :-1] += idle[..., 1:]
    count[:-1] += 1
    return total / count


def total_power_dbm(power_dbm: np.ndarray, occupancy: np.ndarray) -> np.ndarray:
    lin = np.where(occupancy, 10.0 ** (np.asarray(power_dbm) / 10.0), 0.0)
    return 10.0 * np.log10(lin.sum(axis=-1))


def noiseless_gain(cfg: SimulatorConfig, power_dbm, occupancy) -> np.ndarray:
    """AGC-renormalized gain without measurement noise; idle channels read 0.

    Vectorized over leading batch dimensions.
    """
    power_dbm = np.asarray(power_dbm, dtype=float)
    occ = np.asarray(occupancy, dtype=bool)
    z = occ.shape[-1]
    u = np.linspace(-1.0, 1.0, z) if z > 1 else np.zeros(1)
    p_ref = BASE_POWER_DBM + 10.0 * np.log10(z)
    excess = total_power_dbm(power_dbm, occ) - p_ref
    shape = (
        ripple_profile(cfg, z)
        + cfg.tilt_coeff_db_per_db * excess[..., None] * u
        + cfg.coupling_coeff_db * loading_term(occ)
    )
    n_occ = occ.sum(axis=-1, keepdims=True)
    mean_occ = np.where(occ, shape, 0.0).sum(axis=-1, keepdims=True) / n_occ
    return np.where(occ, cfg.target_gain_db + (shape - mean_occ), 0.0)


class EdfaSimulator:
    """Seeded measurement oracle.

    Noise for call ``c`` on stream ``s`` comes from its own generator keyed by
    ``(seed, s, c)``, so replaying the same call index reproduces the same
    measurement regardless of what happened in between. Not thread-safe: the
    call counter is shared state.
    """

    def __init__(self, cfg: SimulatorConfig, stream: int = 0):
        self.cfg = cfg
        self.stream = int(stream)
        self.calls = 0

    def _noise(self, key: int, z: int) -> np.ndarray:
        if self.cfg.noise_sigma_db == 0:
            return np.zeros(z)
        rng = np.random.default_rng([self.cfg.seed, self.stream, key])
        return rng.normal(0.0, self.cfg.noise_sigma_db, size=z)

    def measure(self, x: InputSpectrum, call_index: int | None = None) -> GainSpectrum:
        if call_index is None:
            call_index = self.calls
            self.calls += 1
        g = noiseless_gain(self.cfg, x.power_dbm, x.occupancy)
        g = np.where(x.occupancy, g + self._noise(call_index, x.z), 0.0)
        return GainSpectrum(g, x.occupancy)

    def measure_fully_loaded(self, z: int) -> GainSpectrum:
        x = InputSpectrum(np.full(z, BASE_POWER_DBM), np.ones(z, dtype=bool))
        g = noiseless_gain(self.cfg, x.power_dbm, x.occupancy)
        draws = [g + self._noise(_CALIBRATION_TAG + k, z) for k in range(CALIBRATION_DRAWS)]
        return GainSpectrum(np.mean(draws, axis=0), x.occupancy)


def measure(cfg: SimulatorConfig, x: InputSpectrum, call_index: int = 0, stream: int = 0) -> GainSpectrum:
    """Stateless single measurement; see :class:`EdfaSimulator`."""
    return EdfaSimulator(cfg, stream).measure(x, call_index)


def measure_fully_loaded(cfg: SimulatorConfig, grid: ChannelGrid | int, stream: int = 0) -> GainSpectrum:
    """All channels occupied at base power, noise averaged over 16 draws."""
    z = grid if isinstance(grid, int) else grid.z
    return EdfaSimulator(cfg, stream).measure_fully_loaded(z)
