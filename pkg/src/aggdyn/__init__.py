"""Projected primal-dual dynamics for monotone aggregative games with coupling constraints."""
from .dynamics import SimParams, Trajectory, evi_residual, simulate, step
from .equilibrium import (KktResidual, classify_equilibrium, kkt_residual, lagrangian_value,
                          lyapunov_report, lyapunov_value)
from .errors import (DimensionMismatchError, GameValidationError, InfeasiblePointError,
                     MissingModulusError, OracleError, ProjectionError, ScenarioParseError)
from .game import (CostFn, GameSpec, average, cost_value, game_from_dict, load_scenario,
                   register_smooth_cost, save_scenario, validate_game)
from .maps import ConstraintMap
from .operators import (certify_strict_monotonicity, empirical_monotonicity_test,
                        extended_operator, pseudo_gradient)
from .oracle import OracleParams, cross_validate, feasibility_probe, multi_start, solve_vi
from .reformulation import CoverageError, NonlinearCoupling, pull_back, reformulate
from .sets import Ball, Box, Halfspaces, LiftedSublevel, NonnegOrthant, set_from_dict
from .state import SystemState

__version__ = "0.1.0"
