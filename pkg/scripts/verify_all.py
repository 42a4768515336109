#!/usr/bin/env python3
"""Run every verification subcommand at a small, fast scale.

Exit code is the number of failed checks, so CI can gate on zero. Pass
--n / --trials / --seed to rescale; the defaults finish in well under a
minute.
"""

import argparse
import sys

from entbump.cli import run


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=8, help="grid resolution (default 8)")
    parser.add_argument("--trials", type=int, default=100, help="trials per suite (default 100)")
    parser.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    args = parser.parse_args()

    n, trials, seed = str(args.n), str(args.trials), str(args.seed)
    jobs = [
        ["verify-fs", "--n", n, "--trials", trials, "--seed", seed],
        ["verify-main", "--n", n, "--trials", trials, "--seed", seed],
        ["verify-cor", "--n", n, "--trials", trials, "--seed", seed],
        ["verify-ainf", "--n", n, "--trials", trials, "--seed", seed],
        ["domination", "--n", n, "--trials", trials, "--seed", seed],
        ["replay", "--n", n, "--trials", trials, "--seed", seed],
        ["sparse-split", "--n", n, "--seed", seed],
    ]
    failures = []
    for argv in jobs:
        print(f"$ entbump {' '.join(argv)}")
        code = run(argv)
        if code != 0:
            failures.append((argv[0], code))
        print()
    if failures:
        print("failed:", ", ".join(f"{name} (exit {code})" for name, code in failures))
    else:
        print(f"all {len(jobs)} checks passed")
    return len(failures)


if __name__ == "__main__":
    sys.exit(main())
