"""Lie symmetries, moving frames and invariant feedback for control systems."""

from .control import (
    ErrorDynamicsSpec,
    FeedbackFailure,
    FeedbackLaw,
    bioreactor_family,
    bioreactor_stabilizer,
    check_error_equivariance,
    derive_controlled_symmetry,
    invariantizing_feedback,
    io_linearizing_feedback,
    vector_relative_degree,
)
from .expr import (
    ParseError,
    differentiate,
    evaluate,
    is_zero,
    parse,
    simplify,
    substitute,
    symbol,
    to_text,
    tolerances,
)
from .frames import (
    MovingFrame,
    check_g_compatible,
    freeness_order,
    invariant_tracking_error,
    invariants,
    solve_frame,
)
from .geometry import (
    SystemMap,
    Verdict,
    VectorField,
    check_lie_backlund_map,
    is_tangent,
    lie_bracket,
    prolong,
    total_derivative,
)
from .model import ControlSystem, system
from .reduction import check_state_symmetry, reduce
from .sim import Trajectory, compare, integrate, kinetic_switch
from .symmetry import (
    GroupAction,
    check_symmetry,
    determining_equations,
    generator_from_action,
    structure_constants,
    symmetry_residual,
)

__all__ = [
    "ControlSystem",
    "ErrorDynamicsSpec",
    "FeedbackFailure",
    "FeedbackLaw",
    "GroupAction",
    "MovingFrame",
    "ParseError",
    "SystemMap",
    "Trajectory",
    "VectorField",
    "Verdict",
    "bioreactor_family",
    "bioreactor_stabilizer",
    "check_error_equivariance",
    "check_g_compatible",
    "check_lie_backlund_map",
    "check_state_symmetry",
    "check_symmetry",
    "compare",
    "derive_controlled_symmetry",
    "determining_equations",
    "differentiate",
    "evaluate",
    "freeness_order",
    "generator_from_action",
    "integrate",
    "invariant_tracking_error",
    "invariantizing_feedback",
    "invariants",
    "io_linearizing_feedback",
    "is_tangent",
    "is_zero",
    "kinetic_switch",
    "lie_bracket",
    "parse",
    "prolong",
    "reduce",
    "simplify",
    "solve_frame",
    "structure_constants",
    "substitute",
    "symbol",
    "symmetry_residual",
    "system",
    "to_text",
    "tolerances",
    "total_derivative",
    "vector_relative_degree",
]
