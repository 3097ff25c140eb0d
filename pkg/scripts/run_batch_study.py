"""Learning curves of gpr-al for several batch sizes k (top-k variance per refit)."""

import argparse
import csv
import dataclasses
import sys

import numpy as np

from edfagp.config import load_config
from edfagp.experiment import build_repository, build_test_set
from edfagp.active_learning import run_al_loop

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--batch", type=int, nargs="+", default=[1, 5, 10])
    args = ap.parse_args()
    cfg = load_config(args.config)
    test, repo = build_test_set(cfg), build_repository(cfg)
    out = csv.writer(sys.stdout)
    out.writerow(["batch_k", "measurements", "rmse_mean"])
    for k in args.batch:
        al = dataclasses.replace(cfg.al, batch_k=k)
        traces = [
            run_al_loop(al, "gpr-al", cfg.simulator, test, repo=repo, grid=cfg.grid.build(), gpr_config=cfg.gpr, round_index=r)
            for r in range(cfg.rounds)
        ]
        for n in sorted({n for n, _ in traces[0].checkpoints()}):
            out.writerow([k, n, repr(float(np.mean([dict(t.checkpoints())[n] for t in traces])))])
