"""Balanced graph cuts through exact continuous relaxations and RatioDCA-prox."""

from .graph import (Graph, GraphFormatError, cut_value, indicator, parse_graph, read_graph,
                    serialize_graph, total_variation, tv_subgradient, two_moons_graph)
from .inner import InnerProblem, InnerSolution, InnerSolverError, pd_gap, solve_inner, \
    solve_inner_prox_form
from .objective import (L2, L2_SQUARED, DegeneratePointError, RatioObjective, cut_objective,
                        inner_objective_value, linear_term, ratio_value, subgradients)
from .oracle import brute_force_optimum, directional_derivative_check, verify_exact_relaxation
from .outer import (RunReport, SolveResult, SolverConfig, eigen_residual, improve_partition,
                    multi_init_run, optimal_threshold, ratiodca_prox)
from .setfn import (RATIO_CHEEGER, RATIO_CUT, BalanceFunction, Extension, balance_set_value,
                    custom_balance, extension_subgradient, extension_value, lovasz_subgradient,
                    lovasz_value)
from .spectral import second_eigenvector

__version__ = "0.1.0"
