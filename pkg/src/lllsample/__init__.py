"""Approximate uniform sampling of CSP solutions via projected Glauber dynamics."""

from .core import (
    AtomicConstraint,
    CspFormula,
    FormulaStats,
    atomize_general_constraint,
    build_dependency_graph,
    build_formula,
    compute_stats,
    evaluate,
    hypergraph_coloring_formula,
)
from .projection import (
    ProjectionScheme,
    construct_general_scheme,
    construct_interval_scheme,
    construct_marking_scheme,
    verify_entropy_criterion,
)
from .sampler import (
    PartialProjectedConfig,
    SamplerSchedule,
    derive_schedule,
    inverse_sample,
    run_glauber,
    run_many,
)

__version__ = "0.1.0"
