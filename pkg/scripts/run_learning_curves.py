"""Run a config through the experiment runner and print the learning-curve table.

    python3 scripts/run_learning_curves.py configs/desk_scale.json [--force]
"""

import argparse
import sys

from edfagp.cli import cmd_run

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--force", action="store_true")
    ap.add_argument("--rounds", type=int)
    args = ap.parse_args()
    sys.exit(cmd_run(args.config, force=args.force, rounds=args.rounds))
