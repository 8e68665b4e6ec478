"""Preference-steered counterfactual regret minimization for small
imperfect-information games: vanilla and preference-weighted solvers,
external-sampling Monte Carlo, exact evaluation, approachability monitors,
and a batch experiment runner.
"""

from ._kernels import NUMBA_ENABLED
from .evaluation import (BoundViolation, ConvergenceTrace,
                         ExploitabilityReport, StyleMetrics, TracePoint,
                         best_response, bound_monitor, convergence_bound,
                         exploitability, extract_alpha,
                         first_decision_infosets, head_to_head,
                         style_metrics)
from .game import (CHANCE, FlatGame, Game, GameError, GameStructureError,
                   MissingInfosetError, ReachProbabilities, as_flat,
                   enumerate_infosets, expected_value, random_profile,
                   reach_probabilities, uniform_profile)
from .games import (KuhnPoker, MatrixTreeGame, SmallPoker, build_game,
                    kuhn_equilibrium_family, kuhn_player2_equilibrium)
from .normal_form import (AverageRegret, MatrixGame, TargetCone,
                          cone_distance, forcing_halfspace_check,
                          forcing_strategy, normal_form_solve, regret_vector)
from .solvers import (ALGORITHMS, PreferenceConfig, RegretTables,
                      SolveResult, SolverConfig, SolverConfigError,
                      apply_vulnerability, cfr_traverse, checkpoint_schedule,
                      mccfr_external_iteration, next_strategy_pref_br,
                      next_strategy_pref_rm, next_strategy_rm, run_solver)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "AverageRegret", "BoundViolation", "CHANCE",
    "ConvergenceTrace", "ExploitabilityReport", "FlatGame", "Game",
    "GameError", "GameStructureError", "KuhnPoker", "MatrixGame",
    "MatrixTreeGame", "MissingInfosetError", "NUMBA_ENABLED",
    "PreferenceConfig", "ReachProbabilities", "RegretTables", "SmallPoker",
    "SolveResult", "SolverConfig", "SolverConfigError", "StyleMetrics",
    "TargetCone", "TracePoint", "apply_vulnerability", "as_flat",
    "best_response", "bound_monitor", "build_game", "cfr_traverse",
    "checkpoint_schedule", "cone_distance", "convergence_bound",
    "enumerate_infosets", "expected_value", "exploitability",
    "extract_alpha", "first_decision_infosets", "forcing_halfspace_check",
    "forcing_strategy", "head_to_head", "kuhn_equilibrium_family",
    "kuhn_player2_equilibrium", "mccfr_external_iteration",
    "next_strategy_pref_br", "next_strategy_pref_rm", "next_strategy_rm",
    "normal_form_solve", "random_profile", "reach_probabilities",
    "regret_vector", "run_solver", "style_metrics", "uniform_profile",
]
