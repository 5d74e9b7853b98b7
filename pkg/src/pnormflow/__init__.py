"""Strongly local graph clustering with p-norm flow diffusion."""
from __future__ import annotations

__version__ = "0.1.0"

from .clustering import (
    METRIC_FIELDS,
    ClusterMetrics,
    SweepResult,
    delta_search,
    evaluate,
    metrics_record,
    run_pipeline,
    sweep_cut,
)
from .diffusion import (
    DEFAULT_EPS,
    DiffusionProblem,
    DualSolution,
    FlowAssignment,
    make_problem,
    objective,
    oracle_solve,
    recover_flow,
    solve,
    solve_general,
    solve_q2,
)
from .errors import (
    BudgetExceededError,
    ConnectivityError,
    GraphValidationError,
    InfeasibleMassError,
    LineSearchError,
    NoClusterError,
    ParameterError,
    ParseError,
    PNormFlowError,
    StaleSolutionError,
    UndefinedConductanceError,
    UnsupportedExponentError,
)
from .graph import Graph, NodeSet, conductance, cut_size, load_edge_list, volume
from .synth import GeneratorSpec, gen_dumbbell, gen_grid, gen_planted_partition

__all__ = [name for name in dir() if not name.startswith("_")]
