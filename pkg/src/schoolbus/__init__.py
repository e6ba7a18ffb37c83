"""Multi-school PM school bus routing that rewards trip compatibility."""
from .blocking import Block, BlockingSolution, count_saveable_buses, solve_blocking, solve_blocking_oracle
from .exact import ExactSolverGuardError, solve_exact
from .heuristic import solve_heuristic
from .instance import Instance, School, ScenarioSpec, Stop, generate_scenario, load_instance, save_instance, validate_instance
from .mip import ModelSpec, build_blocking_model, build_routing_model, export_model, read_mps
from .report import ExperimentRow, TradeoffSummary, emit_reports, run_experiment, tradeoff, travel_time_histogram
from .routing import ObjectiveKind, RoutingSolution, SolverConfig, evaluate_objective
from .trips import (
    CompatibilityGraph,
    Trip,
    TripSchedule,
    build_compatibility_graph,
    check_routing_feasibility,
    deadhead,
    is_compatible,
    schedule_trip,
    trip_travel_time,
)

__version__ = "0.1.0"
