"""Measured per-iteration contraction of the three schemes against their rate constants.

    python3 scripts/contraction_bench.py --seeds 20 --n 2 4 8 --workers 4 --out bench.csv
"""

import argparse
import csv
import sys
from collections import defaultdict

from quartic_newton.bench import expected_alpha_floor, run_bench


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--methods", nargs="+", default=["dqnm", "rqn", "qrnm"])
    p.add_argument("--n", type=int, nargs="+", default=[2, 4, 6, 8])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args(argv)

    rows = []
    for method in args.methods:
        results = run_bench(method, args.n, range(args.seeds), workers=args.workers)
        by_n = defaultdict(list)
        for r in results:
            by_n[r.n].append(r)
            rows.append(r.row())
        print(f"\n{method}")
        print(f"{'n':>3} {'q_min':>8} {'alpha':>8} {'worst ratio':>12} {'1-alpha':>8} "
              f"{'mean iters':>10} {'pass':>6}")
        for n, rs in sorted(by_n.items()):
            worst = max(rs, key=lambda r: r.max_ratio / r.bound)
            print(f"{n:3d} {min(r.q for r in rs):8.4f} {worst.alpha:8.5f} {worst.max_ratio:12.6f} "
                  f"{worst.bound:8.5f} {sum(r.iterations for r in rs) / len(rs):10.1f} "
                  f"{sum(r.passed for r in rs):3d}/{len(rs)}")
        print(f"alpha floor at q=1: {expected_alpha_floor(method, 1.0):.6f}")

    if args.out and rows:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0 if all(r["passed"] for r in rows) else 3


if __name__ == "__main__":
    sys.exit(main())
