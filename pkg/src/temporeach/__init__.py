"""Budget-aware temporal refinement for reachability of neural feedback loops."""

from .bounder import (
    BoundPropagationBackend,
    Query,
    QueryStatus,
    QueryTiming,
    network_bounds,
    set_timeout,
    status,
    symbolic_reach,
)
from .clock import Clock, CostModel, SimulatedClock, WallClock, load_cost_model
from .expressions import ExprError, parse_expression
from .geometry import Hyperrect, hull, intersect
from .intervals import interval_eval
from .model import (
    EvaluationError,
    ModelError,
    NeuralNet,
    SystemSpec,
    closed_loop_step,
    eval_dynamics,
    eval_network,
    load_network,
    load_system,
    parse_network,
    parse_system,
    serialize_network,
    serialize_system,
)
from .oracle import (
    ErrorMetric,
    ErrorReport,
    audit_soundness,
    error_per_step,
    error_total,
    evaluate_run,
    sample_hulls,
)
from .scheduler import (
    Phase,
    ScheduleRecord,
    calc_steps,
    fixed_schedule_reach,
    refined_reach,
    schedule_from_json,
    schedule_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "BoundPropagationBackend",
    "Clock",
    "CostModel",
    "ErrorMetric",
    "ErrorReport",
    "EvaluationError",
    "ExprError",
    "Hyperrect",
    "ModelError",
    "NeuralNet",
    "Phase",
    "Query",
    "QueryStatus",
    "QueryTiming",
    "ScheduleRecord",
    "SimulatedClock",
    "SystemSpec",
    "WallClock",
    "audit_soundness",
    "calc_steps",
    "closed_loop_step",
    "error_per_step",
    "error_total",
    "eval_dynamics",
    "eval_network",
    "evaluate_run",
    "fixed_schedule_reach",
    "hull",
    "intersect",
    "interval_eval",
    "load_cost_model",
    "load_network",
    "load_system",
    "network_bounds",
    "parse_expression",
    "parse_network",
    "parse_system",
    "refined_reach",
    "sample_hulls",
    "schedule_from_json",
    "schedule_to_json",
    "serialize_network",
    "serialize_system",
    "set_timeout",
    "status",
    "symbolic_reach",
]
