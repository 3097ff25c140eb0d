"""Analytical gain-offset model used as the GP mean function.

The prior shifts the fully-loaded gain spectrum ``g`` by the average gap
between the target spectrum and ``g``::

    m_i = g_i + mean_j(G_T[j] - g[j])

By default ``j`` runs over all channels, which makes the prior independent
of the input spectrum. With ``occupied_only=True`` the average runs over the
channels occupied in the queried spectrum instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import GainSpectrum, InputSpectrum


@dataclass(frozen=True, eq=False)
class PhysicsPrior:
    g: np.ndarray
    target: np.ndarray
    occupied_only: bool = False

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        t = np.array(self.target, dtype=float)
        if t.ndim == 0:
            t = np.full_like(g, float(t))
        if g.ndim != 1 or g.shape != t.shape:
            raise ValueError("g and target must be vectors of equal length")
        g.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "target", t)

    @classmethod
    def from_calibration(cls, fully_loaded: GainSpectrum, target_gain_db=16.0, occupied_only=False):
        return cls(fully_loaded.gain_db, target_gain_db, occupied_only)

    @property
    def z(self) -> int:
        return self.g.shape[0]

    def batch(self, power_dbm, occupancy) -> np.ndarray:
        """Prior mean for an ``(n, z)`` batch of inputs."""
        occ = np.atleast_2d(np.asarray(occupancy, dtype=bool))
        if occ.shape[-1] != self.z:
            raise ValueError(f"spectrum has {occ.shape[-1]} channels, prior has {self.z}")
        gap = self.target - self.g
        if self.occupied_only:
            offset = (occ * gap).sum(axis=1, keepdims=True) / occ.sum(axis=1, keepdims=True)
        else:
            offset = np.full((occ.shape[0], 1), gap.mean())
        return self.g + offset

    def __call__(self, x: InputSpectrum) -> GainSpectrum:
        return prior_mean(self, x)

    def to_dict(self) -> dict:
        return {"g": self.g.tolist(), "G_T": self.target.tolist(), "occupied_only": self.occupied_only}


class ZeroMean:
    """Constant-zero mean function for the no-physics ablation."""

    def batch(self, power_dbm, occupancy) -> np.ndarray:
        return np.zeros(np.atleast_2d(occupancy).shape)

    def __call__(self, x: InputSpectrum) -> GainSpectrum:
        return zero_mean(x)

    def to_dict(self) -> dict:
        return {"kind": "zero"}


def prior_mean(prior: PhysicsPrior, x: InputSpectrum) -> GainSpectrum:
    m = prior.batch(x.power_dbm[None, :], x.occupancy[None, :])[0]
    return GainSpectrum(m, x.occupancy)


def zero_mean(x: InputSpectrum) -> GainSpectrum:
    return GainSpectrum(np.zeros(x.z), x.occupancy)
