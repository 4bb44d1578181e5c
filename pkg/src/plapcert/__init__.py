"""Positive-solution certificates and solvers for coupled (p1, p2)-Laplacian systems."""

from .certificates import (
    ConeConstants,
    RadiusBox,
    certify,
    check_index_conditions,
    check_nonexistence,
    compute_constants,
    growth_bound,
)
from .operator import StatePair, apply_operator, cone_membership
from .problem import ProblemSpec, load_config, paper_example, parse_config, validate_spec
from .solver import SolverConfig, multi_start_solve, picard_solve

__version__ = "0.1.0"

__all__ = [
    "ConeConstants",
    "ProblemSpec",
    "RadiusBox",
    "SolverConfig",
    "StatePair",
    "apply_operator",
    "certify",
    "check_index_conditions",
    "check_nonexistence",
    "compute_constants",
    "cone_membership",
    "growth_bound",
    "load_config",
    "multi_start_solve",
    "paper_example",
    "parse_config",
    "picard_solve",
    "validate_spec",
]
