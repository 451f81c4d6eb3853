"""Distributed Nash equilibrium seeking over digraphs with row-stochastic weights."""

from .engine import AlgoConfig, Trajectory, apply_operator_A, km_step, metrics, mixed_norm, run
from .errors import NashError
from .game_model import (
    GameConstants,
    GameSpec,
    check_diagonal_dominance,
    check_monotonicity_sampled,
    evaluate_partial_gradient,
    project_action,
    step_size_bounds,
)
from .games import (
    LinearGame,
    OsnrGame,
    linear_game_oracle,
    osnr_closed_form_ne,
    osnr_condition_check,
    osnr_constants,
    osnr_gradient,
    osnr_jacobian,
    random_osnr_instance,
    nonmonotone_linear_game,
)
from .network import (
    DiGraph,
    WeightMatrix,
    build_cycle_plus_random,
    build_row_stochastic,
    is_strongly_connected,
    validate_weights,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoConfig",
    "DiGraph",
    "GameConstants",
    "GameSpec",
    "LinearGame",
    "NashError",
    "OsnrGame",
    "Trajectory",
    "WeightMatrix",
    "apply_operator_A",
    "build_cycle_plus_random",
    "build_row_stochastic",
    "check_diagonal_dominance",
    "check_monotonicity_sampled",
    "evaluate_partial_gradient",
    "is_strongly_connected",
    "km_step",
    "linear_game_oracle",
    "metrics",
    "mixed_norm",
    "nonmonotone_linear_game",
    "osnr_closed_form_ne",
    "osnr_condition_check",
    "osnr_constants",
    "osnr_gradient",
    "osnr_jacobian",
    "project_action",
    "random_osnr_instance",
    "run",
    "step_size_bounds",
    "validate_weights",
]
