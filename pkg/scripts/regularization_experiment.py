"""Iterations of the regularized driver versus its predicted bound as eps shrinks.

Instances have a planted minimizer, a quartic part that is only positive
semidefinite, and a known optimal value.
"""

import argparse

import numpy as np

from quartic_newton.forms import SumOfLinearQuartics
from quartic_newton.generators import random_metric, random_psd
from quartic_newton.objective import CompositeProblem, ConvexQuartic, Zero
from quartic_newton.solvers import (SolverConfig, regularization_iteration_bound,
                                    regularized_solve)


def planted(rng, n):
    m = random_metric(rng, n)
    s = rng.standard_normal(n)
    k = max(1, n // 2)
    a, c = rng.standard_normal((k, n)), rng.uniform(0.2, 1.0, k)
    f = ConvexQuartic(s, 0.0, np.zeros(n), random_psd(rng, n, rank=1, scale=0.3),
                      SumOfLinearQuartics(a, c, 0.0, m))
    L = 24.0 * float(sum(ci * m.dual_norm(ai) ** 4 for ai, ci in zip(a, c)))
    x0 = s + rng.standard_normal(n)
    return CompositeProblem(f, Zero(), m), x0, s, L


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    problems = [planted(rng, args.n) for _ in range(args.instances)]
    print(f"{'eps':>8} {'iters':>8} {'bound':>10} {'ratio':>7} {'max F-F*':>10}")
    for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        its, bounds, errs = [], [], []
        for prob, x0, s, L in problems:
            R = prob.metric.norm(x0 - s)
            run = regularized_solve(prob, x0, eps, R, L, SolverConfig("reg", max_iter=20000))
            its.append(run.iterations)
            bounds.append(regularization_iteration_bound(L, R, eps, prob.value(x0)))
            errs.append(run.params["F_original"])
        print(f"{eps:8.0e} {np.mean(its):8.1f} {np.mean(bounds):10.1f} "
              f"{max(i / b for i, b in zip(its, bounds)):7.3f} {max(errs):10.2e}")


if __name__ == "__main__":
    main()
