"""Run every randomized inequality suite and write the reports as JSON."""

import argparse
import json
import sys
import time

from quartic_newton.verify import run_suite


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="verify_reports.json")
    args = p.parse_args(argv)
    t0 = time.perf_counter()
    reports = run_suite("all", args.trials, args.seed)
    for r in reports:
        print(f"{'ok  ' if r.passed else 'FAIL'} {r.name:20s} worst/tol = "
              f"{r.worst_violation / r.tolerance:9.2e}")
    with open(args.out, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1, sort_keys=True)
    print(f"{len(reports)} checks, {time.perf_counter() - t0:.1f} s -> {args.out}")
    return 0 if all(r.passed for r in reports) else 4


if __name__ == "__main__":
    sys.exit(main())
