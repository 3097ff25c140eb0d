"""Run every (method, round) pair of an experiment config and write plot-ready outputs."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .active_learning import ExperimentTrace, Repository, generate_repository, run_al_loop
from .config import ExperimentConfig
from .domain import Dataset
from .evaluation import aggregate_rounds, histogram_from_errors, make_test_set, masked_errors

log = logging.getLogger(__name__)

OUTPUT_FILES = ("learning_curve.csv", "histogram.csv", "summary.json", "config.json")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    test: Dataset
    traces: dict[str, list[ExperimentTrace]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def build_test_set(cfg: ExperimentConfig) -> Dataset:
    return make_test_set(
        cfg.grid.build(),
        cfg.eval.test_size,
        cfg.simulator,
        seed=cfg.eval.test_seed,
        occupancy_mode=cfg.al.occupancy_mode,
    )


def build_repository(cfg: ExperimentConfig, round_index: int = 0) -> Repository:
    seed = cfg.al.repository_seed + (0 if cfg.al.shared_repository else round_index)
    return generate_repository(cfg.grid.build(), cfg.al.repository_size, seed, occupancy_mode=cfg.al.occupancy_mode)


def run_experiment(cfg: ExperimentConfig, test: Dataset | None = None) -> ExperimentResult:
    """Run all methods and rounds sequentially. A failing method is recorded, not raised."""
    grid = cfg.grid.build()
    test = test if test is not None else build_test_set(cfg)
    result = ExperimentResult(cfg, test)
    repos = {}
    for method in cfg.methods:
        traces = []
        try:
            for r in range(cfg.rounds):
                key = 0 if cfg.al.shared_repository else r
                if key not in repos:
                    repos[key] = build_repository(cfg, r)
                log.info("running %s round %d", method, r)
                traces.append(
                    run_al_loop(
                        cfg.al,
                        method,
                        cfg.simulator,
                        test,
                        repo=repos[key],
                        grid=grid,
                        gpr_config=cfg.gpr,
                        mlp_config=cfg.nn,
                        occupied_only_prior=cfg.prior.occupied_only,
                        round_index=r,
                    )
                )
        except Exception as exc:  # one method failing must not abort the others
            log.exception("method %s failed", method)
            result.errors[method] = f"{type(exc).__name__}: {exc}"
            continue
        result.traces[method] = traces
    return result


def existing_outputs(out_dir: Path) -> list[Path]:
    found = [out_dir / f for f in OUTPUT_FILES if (out_dir / f).exists()]
    traces = out_dir / "traces"
    if traces.is_dir():
        found += sorted(traces.glob("*.json"))
    return found


def _fmt(v: float) -> str:
    return repr(float(v))


def write_outputs(result: ExperimentResult, out_dir) -> None:
    out_dir = Path(out_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)
    cfg = result.config
    (out_dir / "config.json").write_text(cfg.to_json() + "\n")

    summary = {"methods": {}, "errors": dict(sorted(result.errors.items())), "error_sign": "predicted - measured"}
    with open(out_dir / "learning_curve.csv", "w", newline="") as lc, open(out_dir / "histogram.csv", "w", newline="") as hc:
        lw = csv.writer(lc)
        lw.writerow(["method", "measurements", "rmse_mean", "rmse_std", "rmse_min", "rmse_max"])
        hw = csv.writer(hc)
        hw.writerow(["bin_lo", "bin_hi", "count", "method", "n_train"])
        for method in cfg.methods:
            traces = result.traces.get(method)
            if not traces:
                continue
            for t in traces:
                t.to_json(out_dir / "traces" / f"{method}_round{t.round}.json")
            curve = aggregate_rounds(traces)
            for p in curve:
                lw.writerow([method, p.measurements, _fmt(p.rmse_mean), _fmt(p.rmse_std), _fmt(p.rmse_min), _fmt(p.rmse_max)])
            errs = np.concatenate(
                [masked_errors(t.final_predictions, result.test.Y, result.test.valid) for t in traces]
            )
            hist = histogram_from_errors(errs, cfg.eval.bin_width_db)
            n_train = traces[0].records[-1].measurements
            for lo, hi, count in hist.rows():
                hw.writerow([_fmt(lo), _fmt(hi), count, method, n_train])
            final = curve[-1]
            summary["methods"][method] = {
                "rounds": len(traces),
                "final_measurements": final.measurements,
                "final_rmse_mean": final.rmse_mean,
                "final_rmse_std": final.rmse_std,
                "max_abs_error": hist.max_abs_error,
                "truncated": any(t.truncated for t in traces),
            }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def format_table(result: ExperimentResult) -> str:
    lines = [f"{'method':<16}{'n':>6}{'rmse_mean':>12}{'rmse_std':>12}"]
    for method in result.config.methods:
        if method in result.errors:
            lines.append(f"{method:<16}  FAILED: {result.errors[method]}")
            continue
        p = aggregate_rounds(result.traces[method])[-1]
        lines.append(f"{method:<16}{p.measurements:>6}{p.rmse_mean:>12.4f}{p.rmse_std:>12.4f}")
    return "\n".join(lines)
