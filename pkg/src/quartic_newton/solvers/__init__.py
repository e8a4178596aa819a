from .methods import (METHODS, Certificate, IterateRecord, RunLog, SolverConfig, SolverError,
                      dqnm, qrnm, qrnm_coefficients, reference_optimum, rqn, solve)
from .parameters import (clamp_open, dqnm_alpha, kappa_gamma, qrnm_alpha, qrnm_parameters,
                         rqn_alpha, rqn_parameters, tau_star)
from .regularization import (ProxInnerResult, ProxOuterLog, grad_map_step, hessian_bound,
                             prox_inner_solve, prox_outer_loop, regularization_iteration_bound,
                             regularized_solve, stage1_iteration_bound)
