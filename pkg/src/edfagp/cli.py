"""Command-line entry point.

    edfagp run --config exp.json [--force] [--rounds N] [--methods gpr-al,nn-random]
    edfagp inspect {ripple,repository,prior} --config exp.json [--out file.csv]
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .edfa_sim import measure_fully_loaded, ripple_profile
from .experiment import existing_outputs, format_table, build_repository, run_experiment, write_outputs
from .physics_prior import PhysicsPrior

SUBJECTS = ("ripple", "repository", "prior")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edfagp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    run.add_argument("--rounds", type=int)
    run.add_argument("--methods", help="comma-separated subset of methods")

    ins = sub.add_parser("inspect", help="dump simulator / repository / prior internals as CSV")
    ins.add_argument("subject", choices=SUBJECTS)
    ins.add_argument("--config", required=True, type=Path)
    ins.add_argument("--out", type=Path, help="write CSV here instead of stdout")
    return p


def cmd_run(config_path, force=False, rounds=None, methods=None) -> int:
    try:
        cfg = load_config(config_path, rounds=rounds, methods=methods)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    out_dir = Path(cfg.output_dir)
    clash = existing_outputs(out_dir)
    if clash and not force:
        print(f"refusing to overwrite {len(clash)} existing output file(s) in {out_dir}; pass --force", file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    write_outputs(result, out_dir)
    print(format_table(result))
    return 0 if result.ok else 1


def _ripple_rows(cfg):
    grid = cfg.grid.build()
    r = ripple_profile(cfg.simulator, grid.z)
    yield ["channel", "grid_slot", "ripple_db"]
    for k, (slot, v) in enumerate(zip(grid.active_indices, r)):
        yield [k, slot, repr(float(v))]


def _repository_rows(cfg):
    stats = build_repository(cfg).stats()
    yield ["stat", "key", "value"]
    yield ["size", "", stats["size"]]
    yield ["occupancy_rate", "", repr(stats["occupancy_rate"])]
    for dev, count in stats["deviation_histogram"].items():
        yield ["deviation_count", dev, count]


def _prior_rows(cfg):
    grid = cfg.grid.build()
    cal = measure_fully_loaded(cfg.simulator, grid)
    prior = PhysicsPrior.from_calibration(cal, cfg.simulator.target_gain_db, cfg.prior.occupied_only)
    m = prior.batch(np.zeros((1, grid.z)), np.ones((1, grid.z), dtype=bool))[0]
    yield ["channel", "grid_slot", "g_db", "target_db", "prior_db"]
    for k, slot in enumerate(grid.active_indices):
        yield [k, slot, repr(float(prior.g[k])), repr(float(prior.target[k])), repr(float(m[k]))]


def cmd_inspect(subject, config_path, out=None) -> int:
    if subject not in SUBJECTS:
        print(f"unknown subject {subject!r}; choose from {', '.join(SUBJECTS)}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    rows = {"ripple": _ripple_rows, "repository": _repository_rows, "prior": _prior_rows}[subject](cfg)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).write_text(buf.getvalue())
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(args.config, args.force, args.rounds, args.methods)
    return cmd_inspect(args.subject, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
