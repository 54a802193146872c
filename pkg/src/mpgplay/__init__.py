"""Exact tabular gradient play and natural gradient play for Markov potential games."""

from . import kernels
from .errors import (
    GameParseError,
    GameValidationError,
    InvalidConfigError,
    MissingPotentialError,
    NumericalBlowUp,
    SearchSpaceTooLarge,
)
from .game import GameSpec, figure1_game, load_game, parse_game, random_identical_interest_game, validate_game
from .policy import PolicyParams, PolicyTable, softmax_policy, uniform_params
from .evaluation import evaluate
from .diagnostics import brute_force_pure_ne, c_theta, lojasiewicz_check, ne_gap, validate_potential_property
from .dynamics import RunConfig, run_trajectory, theory_stepsizes

__version__ = "0.1.0"

__all__ = [
    "GameParseError",
    "GameValidationError",
    "InvalidConfigError",
    "MissingPotentialError",
    "NumericalBlowUp",
    "SearchSpaceTooLarge",
    "GameSpec",
    "PolicyParams",
    "PolicyTable",
    "RunConfig",
    "brute_force_pure_ne",
    "c_theta",
    "evaluate",
    "figure1_game",
    "kernels",
    "load_game",
    "lojasiewicz_check",
    "ne_gap",
    "parse_game",
    "random_identical_interest_game",
    "run_trajectory",
    "softmax_policy",
    "theory_stepsizes",
    "uniform_params",
    "validate_game",
    "validate_potential_property",
]
