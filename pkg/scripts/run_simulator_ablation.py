"""gpr-al vs gpr-random at a fixed budget while switching simulator effects off one at a time."""

import argparse
import dataclasses

import numpy as np

from edfagp.active_learning import run_al_loop
from edfagp.config import load_config
from edfagp.experiment import build_repository, build_test_set

VARIANTS = {
    "default": {},
    "no_coupling": {"coupling_coeff_db": 0.0},
    "no_tilt": {"tilt_coeff_db_per_db": 0.0},
    "noiseless": {"noise_sigma_db": 0.0},
    "weak_coupling": {"coupling_coeff_db": 0.05},
}

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--at", type=int, default=100)
    args = ap.parse_args()
    base = load_config(args.config)
    al = dataclasses.replace(base.al, eval_checkpoints=(args.at,), max_measurements=args.at)
    print(f"{'variant':<15}{'gpr-al':>10}{'gpr-random':>12}")
    for name, change in VARIANTS.items():
        cfg = dataclasses.replace(base, simulator=dataclasses.replace(base.simulator, **change))
        test, repo = build_test_set(cfg), build_repository(cfg)
        row = []
        for method in ("gpr-al", "gpr-random"):
            rmses = [
                run_al_loop(al, method, cfg.simulator, test, repo=repo, grid=cfg.grid.build(), gpr_config=cfg.gpr, round_index=r).records[-1].rmse
                for r in range(cfg.rounds)
            ]
            row.append(np.mean(rmses))
        print(f"{name:<15}{row[0]:>10.4f}{row[1]:>12.4f}")
