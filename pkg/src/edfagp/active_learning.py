"""Candidate repository, max-variance acquisition and the measure/refit loop."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gpr
from .domain import BASE_POWER_DBM, IDLE_FLOOR_DBM, ChannelGrid, Dataset, InputSpectrum, make_grid
from .edfa_sim import EdfaSimulator, SimulatorConfig
from .evaluation import rmse_arrays
from .nn_baseline import MlpConfig, predict_mlp_batch, train_mlp
from .physics_prior import PhysicsPrior

log = logging.getLogger(__name__)

METHODS = ("gpr-al", "gpr-random", "nn-random", "nn-al-transfer")

DEVIATIONS_DB = (-2.0, -1.0, 0.0, 1.0, 2.0)


class RepositoryExhausted(RuntimeError):
    pass


def _draw_occupancy(rng, n, z, mode, p_occupied):
    if mode == "bernoulli":
        return rng.random((n, z)) < p_occupied
    if mode == "uniform_count":
        counts = rng.integers(0, z + 1, size=n)
        ranks = np.argsort(rng.random((n, z)), axis=1).argsort(axis=1)
        return ranks < counts[:, None]
    raise ValueError(f"unknown occupancy mode {mode!r}")


def random_spectra_arrays(
    z, size, rng, base_dbm=BASE_POWER_DBM, deviations=DEVIATIONS_DB, p_occupied=0.5, occupancy_mode="bernoulli"
):
    """Draw ``size`` spectra with a uniform deviation on every occupied channel.

    ``occupancy_mode="bernoulli"`` flips an independent coin per channel;
    ``"uniform_count"`` draws the number of loaded channels uniformly from
    ``0..z`` and then which channels carry them. All-idle draws are rejected
    and redrawn.
    """
    occ = _draw_occupancy(rng, size, z, occupancy_mode, p_occupied)
    dev = rng.choice(np.asarray(deviations, dtype=float), size=(size, z))
    empty = ~occ.any(axis=1)
    while empty.any():
        n = int(empty.sum())
        occ[empty] = _draw_occupancy(rng, n, z, occupancy_mode, p_occupied)
        dev[empty] = rng.choice(np.asarray(deviations, dtype=float), size=(n, z))
        empty = ~occ.any(axis=1)
    power = np.where(occ, base_dbm + dev, IDLE_FLOOR_DBM)
    return power, occ


def random_spectra(z, size, rng, **kw) -> list[InputSpectrum]:
    power, occ = random_spectra_arrays(z, size, rng, **kw)
    return [InputSpectrum(p, o) for p, o in zip(power, occ)]


@dataclass(eq=False)
class Repository:
    """Pool of candidate input spectra and which of them have been measured."""

    power_dbm: np.ndarray
    occupancy: np.ndarray
    measured: np.ndarray = None

    def __post_init__(self):
        self.power_dbm.setflags(write=False)
        self.occupancy.setflags(write=False)
        if self.measured is None:
            self.measured = np.zeros(len(self.power_dbm), dtype=bool)
        if (~self.occupancy.any(axis=1)).any():
            raise ValueError("repository contains an all-idle candidate")

    def __len__(self) -> int:
        return self.power_dbm.shape[0]

    @property
    def candidates(self) -> list[InputSpectrum]:
        return [self.candidate(i) for i in range(len(self))]

    def candidate(self, i: int) -> InputSpectrum:
        return InputSpectrum(self.power_dbm[i], self.occupancy[i])

    def unmeasured(self) -> np.ndarray:
        return np.flatnonzero(~self.measured)

    def mark(self, indices) -> None:
        idx = np.asarray(indices, dtype=int)
        if self.measured[idx].any():
            raise ValueError(f"candidates already measured: {idx[self.measured[idx]].tolist()}")
        self.measured[idx] = True

    def fresh(self) -> "Repository":
        """Same candidates, nothing measured."""
        return Repository(self.power_dbm, self.occupancy)

    def stats(self, base_dbm=BASE_POWER_DBM) -> dict:
        dev = np.rint(self.power_dbm[self.occupancy] - base_dbm).astype(int)
        values, counts = np.unique(dev, return_counts=True)
        return {
            "size": len(self),
            "occupancy_rate": float(self.occupancy.mean()),
            "deviation_histogram": {int(v): int(c) for v, c in zip(values, counts)},
        }


def generate_repository(grid: ChannelGrid | int, size: int, seed: int = 0, **kw) -> Repository:
    if size < 1:
        raise ValueError("repository size must be >= 1")
    z = grid if isinstance(grid, int) else grid.z
    rng = np.random.default_rng([seed, 0])
    return Repository(*random_spectra_arrays(z, size, rng, **kw))


def select_top_k(scores, k: int, indices=None) -> list[int]:
    """The ``k`` highest scores, ties resolved towards the lowest index."""
    scores = np.asarray(scores, dtype=float)
    indices = np.arange(len(scores)) if indices is None else np.asarray(indices)
    if k > len(scores):
        raise ValueError(f"asked for {k} candidates, only {len(scores)} available")
    order = np.lexsort((indices, -scores))
    return [int(i) for i in indices[order[:k]]]


def acquire(model: gpr.GprModel, repo: Repository, k: int = 1) -> list[int]:
    """Indices of the ``k`` unmeasured candidates with the largest posterior variance."""
    idx = repo.unmeasured()
    if len(idx) < k:
        raise RepositoryExhausted(f"{len(idx)} unmeasured candidates left, {k} requested")
    var = gpr.posterior_variance(model, repo.power_dbm[idx])
    return select_top_k(var, k, idx)


def acquire_scored(model, repo, k):
    idx = repo.unmeasured()
    if len(idx) < k:
        raise RepositoryExhausted(f"{len(idx)} unmeasured candidates left, {k} requested")
    var = gpr.posterior_variance(model, repo.power_dbm[idx])
    chosen = select_top_k(var, k, idx)
    pos = np.searchsorted(idx, chosen)
    return chosen, [float(v) for v in var[pos]]


@dataclass(frozen=True)
class AlConfig:
    batch_k: int = 1
    max_measurements: int = 150
    seed_count: int = 1
    eval_checkpoints: tuple[int, ...] = tuple(range(5, 151, 5))
    #: Checkpoints for NN methods; ``None`` means the same as ``eval_checkpoints``.
    nn_checkpoints: tuple[int, ...] | None = None
    rng_seed: int = 0
    repository_size: int = 9578
    repository_seed: int = 0
    #: One repository for all rounds (loop seeds still differ per round).
    shared_repository: bool = True
    #: Re-run the likelihood search at every iteration.
    refit_hyperparameters: bool = True
    #: Loading rule for repository and test spectra, see :func:`random_spectra_arrays`.
    occupancy_mode: str = "bernoulli"

    def __post_init__(self):
        object.__setattr__(self, "eval_checkpoints", tuple(int(c) for c in self.eval_checkpoints))
        if self.nn_checkpoints is not None:
            object.__setattr__(self, "nn_checkpoints", tuple(int(c) for c in self.nn_checkpoints))
        if self.batch_k < 1 or self.seed_count < 1:
            raise ValueError("batch_k and seed_count must be >= 1")
        if self.max_measurements < self.seed_count:
            raise ValueError("max_measurements must be >= seed_count")
        if self.occupancy_mode not in ("bernoulli", "uniform_count"):
            raise ValueError(f"unknown occupancy_mode {self.occupancy_mode!r}")

    def checkpoints_for(self, method: str) -> tuple[int, ...]:
        if method.startswith("nn") and self.nn_checkpoints is not None:
            return self.nn_checkpoints
        return self.eval_checkpoints


@dataclass
class IterationRecord:
    measurements: int
    chosen: list[int]
    chosen_variance: list[float] | None = None
    hyperparameters: dict | None = None
    rmse: float | None = None


@dataclass
class ExperimentTrace:
    method: str
    round: int
    seed: int
    records: list[IterationRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    prior: dict | None = None
    calibration_measurements: int = 1
    truncated: bool = False
    final_predictions: np.ndarray | None = field(default=None, repr=False, compare=False)

    def checkpoints(self) -> list[tuple[int, float]]:
        return [(r.measurements, r.rmse) for r in self.records if r.rmse is not None]

    def chosen_indices(self) -> list[int]:
        return [i for r in self.records for i in r.chosen]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "round": self.round,
            "seed": self.seed,
            "calibration_measurements": self.calibration_measurements,
            "truncated": self.truncated,
            "config": self.config,
            "prior": self.prior,
            "records": [asdict(r) for r in self.records],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentTrace":
        recs = [IterationRecord(**r) for r in d["records"]]
        return cls(
            d["method"],
            d["round"],
            d["seed"],
            recs,
            d.get("config", {}),
            d.get("prior"),
            d.get("calibration_measurements", 1),
            d.get("truncated", False),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentTrace":
        return cls.from_dict(json.loads(text))


def run_al_loop(
    cfg: AlConfig,
    method: str,
    sim: SimulatorConfig,
    test: Dataset,
    *,
    repo: Repository | None = None,
    grid: ChannelGrid | None = None,
    gpr_config: gpr.GprConfig | None = None,
    mlp_config: MlpConfig | None = None,
    occupied_only_prior: bool = False,
    round_index: int = 0,
) -> ExperimentTrace:
    """Calibrate, seed, then grow the training set until the measurement budget.

    Measurement counts in the trace count training spectra; the fully-loaded
    calibration shot is reported separately as ``calibration_measurements``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if len(test) == 0:
        raise ValueError("test set is empty")
    gcfg = gpr_config or gpr.GprConfig()
    mcfg = mlp_config or MlpConfig()
    grid = grid or test.grid or make_grid()
    z = test.z
    if repo is None:
        repo = generate_repository(z, cfg.repository_size, cfg.repository_seed, occupancy_mode=cfg.occupancy_mode)
    repo = repo.fresh()
    checkpoints = set(cfg.checkpoints_for(method))
    uses_variance = method in ("gpr-al", "nn-al-transfer")
    evaluates_gp = method.startswith("gpr")
    seed = cfg.rng_seed + round_index
    rng = np.random.default_rng([cfg.rng_seed, round_index])
    meter = EdfaSimulator(sim, stream=round_index)

    prior = PhysicsPrior.from_calibration(meter.measure_fully_loaded(z), sim.target_gain_db, occupied_only_prior)
    trace = ExperimentTrace(
        method,
        round_index,
        seed,
        config={"al": _jsonable(asdict(cfg)), "simulator": asdict(sim), "gpr": _jsonable(asdict(gcfg))},
        prior=prior.to_dict(),
    )
    if method.startswith("nn"):
        trace.config["nn"] = _jsonable(asdict(mcfg))

    inputs, outputs = [], []

    def measure(indices):
        repo.mark(indices)
        for i in indices:
            x = repo.candidate(i)
            inputs.append(x)
            outputs.append(meter.measure(x))

    first = rng.choice(repo.unmeasured(), size=min(cfg.seed_count, len(repo)), replace=False)
    measure([int(i) for i in first])
    record = IterationRecord(len(inputs), [int(i) for i in first])
    params = None

    while True:
        n = len(inputs)
        train = Dataset(inputs, outputs, grid)
        final = n >= cfg.max_measurements or len(repo.unmeasured()) == 0
        need_eval = n in checkpoints or final
        model = None
        if (uses_variance and not final) or (evaluates_gp and need_eval):
            model = gpr.fit(train, prior, params, optimize=gcfg.optimize and (cfg.refit_hyperparameters or params is None), config=gcfg)
            params = model.params
            record.hyperparameters = model.params.to_dict()
        if need_eval:
            if evaluates_gp:
                pred, _ = gpr.predict_batch(model, test.X, test.occupancy)
            else:
                pred = predict_mlp_batch(train_mlp(train, mcfg), test.X)
            record.rmse = rmse_arrays(pred, test.Y, test.valid)
            if final:
                trace.final_predictions = pred
            log.debug("%s round %d: n=%d rmse=%.4f", method, round_index, n, record.rmse)
        trace.records.append(record)
        if final:
            if n < cfg.max_measurements:
                trace.truncated = True
                log.warning("%s: repository exhausted at %d measurements", method, n)
            break

        k = min(cfg.batch_k, cfg.max_measurements - n)
        left = repo.unmeasured()
        if len(left) < k:
            trace.truncated = True
            log.warning("%s: only %d candidates left, wanted %d", method, len(left), k)
            k = len(left)
        if uses_variance:
            chosen, var = acquire_scored(model, repo, k)
        else:
            chosen = [int(i) for i in rng.choice(left, size=k, replace=False)]
            var = None
        measure(chosen)
        record = IterationRecord(len(inputs), chosen, var)
    return trace


def _jsonable(d):
    if isinstance(d, dict):
        return {k: _jsonable(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_jsonable(v) for v in d]
    if isinstance(d, np.generic):
        return d.item()
    return d


def checkpoint_rmse(traces: Sequence[ExperimentTrace], n: int) -> list[float]:
    out = []
    for t in traces:
        got = dict(t.checkpoints())
        if n not in got:
            raise KeyError(f"{t.method} round {t.round} has no checkpoint at {n}")
        out.append(got[n])
    return out
