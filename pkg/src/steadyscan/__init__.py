"""Interval-based steady-state exploration for reaction-network models.

The pieces compose a single workflow: contract a model's parameter
intervals by constraint propagation, cover what survives with a paving,
explain an empty result with minimal conflict sets, sample explicit
steady states from the paving, integrate them under perturbation
events, and check the response against a temporal-logic spec.
"""

from .explain import ConflictReport, min_conflict_sets
from .intervals import Box, BoxUnion, DomainError, Interval, IntervalError
from .modelfile import Model, ModelSyntaxError, load_model, parse_model
from .odesim import (
    NumericModelError,
    SimulationError,
    StabilityReport,
    Trace,
    jacobian,
    simulate,
    stability_check,
)
from .propagate import pave, propagate_fixpoint, propagate_fixpoint_ex
from .sampler import SearchStats, Solution, sample_steady_states
from .stl import (
    HorizonError,
    StlError,
    StlFormula,
    StlVerdict,
    UnknownSignalError,
    horizon,
    parse_stl,
    robustness,
    satisfies,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "BoxUnion",
    "ConflictReport",
    "DomainError",
    "HorizonError",
    "Interval",
    "IntervalError",
    "Model",
    "ModelSyntaxError",
    "NumericModelError",
    "SearchStats",
    "SimulationError",
    "Solution",
    "StabilityReport",
    "StlError",
    "StlFormula",
    "StlVerdict",
    "Trace",
    "UnknownSignalError",
    "__version__",
    "horizon",
    "jacobian",
    "load_model",
    "min_conflict_sets",
    "parse_model",
    "parse_stl",
    "pave",
    "propagate_fixpoint",
    "propagate_fixpoint_ex",
    "robustness",
    "sample_steady_states",
    "satisfies",
    "simulate",
    "stability_check",
]
