"""Idle-masked error metrics, histograms, multi-round aggregation, test-set generation.

Errors are signed as ``predicted - measured`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import ChannelGrid, Dataset, GainSpectrum
from .edfa_sim import EdfaSimulator, SimulatorConfig

#: Simulator noise stream reserved for test-set measurements.
TEST_STREAM = 1_000_003


def _stack(spectra: Sequence[GainSpectrum]):
    return np.stack([s.gain_db for s in spectra]), np.stack([s.valid for s in spectra])


def masked_errors(pred, truth, valid) -> np.ndarray:
    """Signed errors of the valid entries, flattened in (sample, channel) order."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    if pred.shape != truth.shape or truth.shape != valid.shape:
        raise ValueError("prediction, truth and mask shapes differ")
    return pred[valid] - truth[valid]


def rmse_arrays(pred, truth, valid) -> float:
    err = masked_errors(pred, truth, valid)
    if err.size == 0:
        raise ValueError("no valid entries to score")
    return float(np.sqrt(np.mean(err * err)))


def rmse(pred: Sequence[GainSpectrum], truth: Sequence[GainSpectrum]) -> float:
    """RMSE pooled over all valid (sample, channel) entries."""
    if len(pred) != len(truth):
        raise ValueError("prediction and truth lists differ in length")
    P, vp = _stack(pred)
    T, vt = _stack(truth)
    if not np.array_equal(vp, vt):
        raise ValueError("prediction and truth valid masks differ")
    return rmse_arrays(P, T, vt)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    max_abs_error: float

    def rows(self):
        return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    per_channel_errors: list[tuple[int, float]]
    histogram: Histogram
    n_valid: int


def histogram_from_errors(err, bin_width: float = 0.05) -> Histogram:
    """Bin signed errors on edges ``(k + 1/2) * bin_width``, symmetric about a bin centred on 0."""
    if not bin_width > 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    err = np.asarray(err, dtype=float)
    if err.size == 0:
        raise ValueError("no valid entries to bin")
    k = np.floor(err / bin_width + 0.5).astype(int)
    half = int(np.abs(k).max())
    counts = np.bincount(k + half, minlength=2 * half + 1)
    edges = (np.arange(-half, half + 2) - 0.5) * bin_width
    return Histogram(edges, counts, float(np.abs(err).max()))


def error_histogram(pred: Sequence[GainSpectrum], truth: Sequence[GainSpectrum], bin_width: float = 0.05) -> Histogram:
    P, vp = _stack(pred)
    T, vt = _stack(truth)
    if not np.array_equal(vp, vt):
        raise ValueError("prediction and truth valid masks differ")
    return histogram_from_errors(masked_errors(P, T, vt), bin_width)


def evaluate(pred, truth, valid, bin_width: float = 0.05) -> MetricsReport:
    """Full report from ``(n, z)`` prediction/truth arrays and the truth's valid mask."""
    valid = np.asarray(valid, dtype=bool)
    err = masked_errors(pred, truth, valid)
    channels = np.nonzero(valid)[1]
    hist = histogram_from_errors(err, bin_width)
    return MetricsReport(
        rmse=rmse_arrays(pred, truth, valid),
        per_channel_errors=[(int(c), float(e)) for c, e in zip(channels, err)],
        histogram=hist,
        n_valid=int(err.size),
    )


@dataclass(frozen=True)
class CurvePoint:
    measurements: int
    rmse_mean: float
    rmse_std: float
    rmse_min: float
    rmse_max: float


def aggregate_rounds(traces) -> list[CurvePoint]:
    """Mean, sample std, min and max of the checkpoint RMSEs across rounds."""
    if not traces:
        raise ValueError("no traces to aggregate")
    methods = {t.method for t in traces}
    if len(methods) > 1:
        raise ValueError(f"traces mix methods: {sorted(methods)}")
    curves = [t.checkpoints() for t in traces]
    counts = [c for c, _ in curves[0]]
    for c in curves[1:]:
        if [n for n, _ in c] != counts:
            raise ValueError("traces have mismatched checkpoint schedules")
    vals = np.array([[r for _, r in c] for c in curves])
    out = []
    for j, n in enumerate(counts):
        col = vals[:, j]
        # identical rounds give exactly zero spread, not float residue from the mean
        std = float(np.std(col, ddof=1)) if len(col) > 1 and np.ptp(col) > 0 else 0.0
        out.append(CurvePoint(n, float(col.mean()), std, float(col.min()), float(col.max())))
    return out


def first_reaching(curve: list[CurvePoint], threshold: float) -> int | None:
    """Smallest measurement count whose mean RMSE is at or below ``threshold``."""
    for p in curve:
        if p.rmse_mean <= threshold:
            return p.measurements
    return None


def make_test_set(grid: ChannelGrid, size: int, sim: SimulatorConfig, seed: int = 0, **spectrum_kw) -> Dataset:
    """Random spectra drawn with the repository rule on a disjoint stream, each measured once."""
    from .active_learning import random_spectra

    if size < 1:
        raise ValueError("test set size must be >= 1")
    rng = np.random.default_rng([seed, 1])
    inputs = random_spectra(grid.z, size, rng, **spectrum_kw)
    meter = EdfaSimulator(sim, stream=TEST_STREAM)
    return Dataset(inputs, [meter.measure(x) for x in inputs], grid)
