#!/usr/bin/env python3
"""Error-vs-k comparison of the composed randomizer against the baselines.

Reproduces the sqrt(k) / linear-k separation at full scale by default;
pass --quick for a small smoke run.  Writes a JSON summary and prints the
per-cell table with fitted log-log slopes.
"""

import argparse
import json
from pathlib import Path

from ldptrack.harness import ExperimentSpec, scaling_study


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="small population for a fast smoke run")
    parser.add_argument("--out", type=Path, default=Path("scaling_study.json"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.quick:
        base = ExperimentSpec(n=2000, d=64, k=64, eps=1.0, beta=0.1,
                              reps=10, seed=args.seed)
        k_grid = [4, 16, 64]
    else:
        base = ExperimentSpec(n=100_000, d=256, k=256, eps=1.0, beta=0.1,
                              reps=30, seed=args.seed)
        k_grid = [16, 64, 256]

    study = scaling_study(base, k_grid, ["futurerand", "sample_one", "naive"])
    args.out.write_text(json.dumps(study.to_json(), indent=2) + "\n")
    print(study.table())
    print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
