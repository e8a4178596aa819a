"""Second-order methods for convex quartic and quartic-regular minimization."""

from .forms import DenseTensor, EuclideanPower, QuarticForm, SumOfLinearQuartics, polarize
from .linalg import Metric
from .objective import (L1, BallIndicator, BoxIndicator, CompositeProblem, ConvexQuartic,
                        LogSumExp, QRegularSpec, Zero)
from .solvers import (SolverConfig, dqnm, prox_inner_solve, qrnm, regularized_solve, rqn,
                      solve)
from .subproblem import QuarticModel, solve_model

__version__ = "0.1.0"
