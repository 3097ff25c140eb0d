"""Channel grid, spectrum containers, datasets and min-max normalization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

#: Input power (dBm) written into idle channels, as an OSA would read an empty slot.
IDLE_FLOOR_DBM = -60.0

#: Per-channel launch power (dBm) at deviation 0.
BASE_POWER_DBM = -16.0

#: Test-time normalized features are clamped into this interval.
NORM_CLAMP = (-0.5, 1.5)


class ConfigurationError(ValueError):
    """Raised for invalid grid / experiment configuration."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelGrid:
    n_total: int = 80
    spacing_ghz: float = 50.0
    active_indices: tuple[int, ...] = tuple(range(1, 80, 2))

    def __post_init__(self):
        idx = tuple(int(i) for i in self.active_indices)
        object.__setattr__(self, "active_indices", idx)
        if not idx:
            raise ConfigurationError("channel grid selects no channels")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigurationError("active_indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.n_total:
            raise ConfigurationError("active_indices must lie in [0, n_total)")

    @property
    def z(self) -> int:
        return len(self.active_indices)


_PATTERNS = {
    "odd": lambda n: [i for i in range(n) if i % 2 == 1],
    "even": lambda n: [i for i in range(n) if i % 2 == 0],
    "all": lambda n: list(range(n)),
}


def make_grid(n_total: int = 80, spacing_ghz: float = 50.0, pattern="odd") -> ChannelGrid:
    """Build a grid of ``n_total`` slots and select the measured ones.

    ``pattern`` is one of ``"odd"``, ``"even"``, ``"all"`` (zero-based slot
    parity), an explicit sequence of slot indices, or a predicate on the index.
    """
    if n_total < 2:
        raise ConfigurationError(f"n_total must be >= 2, got {n_total}")
    if isinstance(pattern, str):
        try:
            active = _PATTERNS[pattern](n_total)
        except KeyError:
            raise ConfigurationError(f"unknown channel pattern {pattern!r}") from None
    elif callable(pattern):
        active = [i for i in range(n_total) if pattern(i)]
    else:
        active = sorted(int(i) for i in pattern)
    if not active:
        raise ConfigurationError("channel pattern selects no channels")
    return ChannelGrid(n_total=n_total, spacing_ghz=spacing_ghz, active_indices=tuple(active))


@dataclass(frozen=True, eq=False)
class InputSpectrum:
    """Per-channel input power (dBm) and occupancy on the active grid."""

    power_dbm: np.ndarray
    occupancy: np.ndarray

    def __post_init__(self):
        p = _frozen(self.power_dbm, float)
        occ = _frozen(self.occupancy, bool)
        if p.ndim != 1 or p.shape != occ.shape:
            raise ValueError("power_dbm and occupancy must be 1-D and of equal length")
        if not occ.any():
            raise ValueError("input spectrum has no occupied channel")
        if np.any(p[~occ] != IDLE_FLOOR_DBM):
            raise ValueError(f"idle channels must carry the floor power {IDLE_FLOOR_DBM} dBm")
        object.__setattr__(self, "power_dbm", p)
        object.__setattr__(self, "occupancy", occ)

    @classmethod
    def from_deviations(cls, deviation_db, occupancy, base_dbm: float = BASE_POWER_DBM):
        occ = np.asarray(occupancy, dtype=bool)
        power = np.where(occ, base_dbm + np.asarray(deviation_db, dtype=float), IDLE_FLOOR_DBM)
        return cls(power, occ)

    @property
    def z(self) -> int:
        return self.power_dbm.shape[0]

    def __eq__(self, other):
        if not isinstance(other, InputSpectrum):
            return NotImplemented
        return np.array_equal(self.power_dbm, other.power_dbm) and np.array_equal(
            self.occupancy, other.occupancy
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GainSpectrum:
    """Per-channel gain (dB); entries with ``valid == False`` are ignored by metrics."""

    gain_db: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        g = _frozen(self.gain_db, float)
        v = _frozen(self.valid, bool)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("gain_db and valid must be 1-D and of equal length")
        object.__setattr__(self, "gain_db", g)
        object.__setattr__(self, "valid", v)

    @property
    def z(self) -> int:
        return self.gain_db.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GainSpectrum):
            return NotImplemented
        return np.array_equal(self.gain_db, other.gain_db) and np.array_equal(self.valid, other.valid)

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    """Index-aligned input and gain spectra.

    Matrix views put samples in rows and channels in columns, so ``X`` and
    ``Y`` both have shape ``(m, z)``.
    """

    inputs: tuple[InputSpectrum, ...]
    outputs: tuple[GainSpectrum, ...]
    grid: ChannelGrid | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs differ in length")
        zs = {s.z for s in self.inputs} | {s.z for s in self.outputs}
        if self.grid is not None:
            zs.add(self.grid.z)
        if len(zs) > 1:
            raise ValueError(f"spectra disagree on channel count: {sorted(zs)}")

    @classmethod
    def from_arrays(cls, power_dbm, occupancy, gain_db, valid=None, grid=None) -> "Dataset":
        power_dbm = np.atleast_2d(power_dbm)
        occupancy = np.atleast_2d(occupancy).astype(bool)
        gain_db = np.atleast_2d(gain_db)
        valid = occupancy if valid is None else np.atleast_2d(valid).astype(bool)
        ins = [InputSpectrum(p, o) for p, o in zip(power_dbm, occupancy)]
        outs = [GainSpectrum(g, v) for g, v in zip(gain_db, valid)]
        return cls(ins, outs, grid)

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def m(self) -> int:
        return len(self.inputs)

    @property
    def z(self) -> int:
        if self.inputs:
            return self.inputs[0].z
        if self.grid is not None:
            return self.grid.z
        raise ValueError("empty dataset has no channel count")

    @cached_property
    def X(self) -> np.ndarray:
        return _frozen(np.stack([s.power_dbm for s in self.inputs]), float)

    @cached_property
    def occupancy(self) -> np.ndarray:
        return _frozen(np.stack([s.occupancy for s in self.inputs]), bool)

    @cached_property
    def Y(self) -> np.ndarray:
        return _frozen(np.stack([s.gain_db for s in self.outputs]), float)

    @cached_property
    def valid(self) -> np.ndarray:
        return _frozen(np.stack([s.valid for s in self.outputs]), bool)

    def extend(self, inputs: Iterable[InputSpectrum], outputs: Iterable[GainSpectrum]) -> "Dataset":
        return Dataset(self.inputs + tuple(inputs), self.outputs + tuple(outputs), self.grid)

    def subset(self, idx: Sequence[int]) -> "Dataset":
        return Dataset([self.inputs[i] for i in idx], [self.outputs[i] for i in idx], self.grid)

    # -- persistence -------------------------------------------------------

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for x, y in zip(self.inputs, self.outputs):
                rec = {
                    "power_dbm": x.power_dbm.tolist(),
                    "occupancy": x.occupancy.tolist(),
                    "gain_db": y.gain_db.tolist(),
                    "valid": y.valid.tolist(),
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path, grid: ChannelGrid | None = None) -> "Dataset":
        ins, outs = [], []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            ins.append(InputSpectrum(rec["power_dbm"], rec["occupancy"]))
            outs.append(GainSpectrum(rec["gain_db"], rec["valid"]))
        return cls(ins, outs, grid)

    def to_csv(self, path) -> None:
        """One row per sample: ``p_<k>`` input powers then ``g_<k>`` gains (blank when invalid)."""
        z = self.z
        header = [f"p_{k}" for k in range(z)] + [f"g_{k}" for k in range(z)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for x, y in zip(self.inputs, self.outputs):
                gains = [repr(float(g)) if v else "" for g, v in zip(y.gain_db, y.valid)]
                w.writerow([repr(float(p)) for p in x.power_dbm] + gains)


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(self.min, float), _frozen(self.max, float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("normalization requires min <= max elementwise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)


def fit_normalization(train: Dataset) -> NormalizationParams:
    """Per-feature min/max over the training inputs."""
    if len(train) == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    X = train.X
    return NormalizationParams(X.min(axis=0), X.max(axis=0))


def apply_normalization(params: NormalizationParams, x) -> np.ndarray:
    """Map features to ``(v - min) / (max - min)``.

    Accepts an :class:`InputSpectrum`, a feature vector or an ``(n, z)``
    matrix. Constant features map to 0; results are clamped to
    ``NORM_CLAMP``.
    """
    v = x.power_dbm if isinstance(x, InputSpectrum) else np.asarray(x, dtype=float)
    span = params.max - params.min
    const = span == 0
    out = (v - params.min) / np.where(const, 1.0, span)
    out = np.where(const, 0.0, out)
    return np.clip(out, *NORM_CLAMP)
