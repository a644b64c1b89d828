"""Demand-robust fleet sizing: instances, the set-cover-mapping heuristic, and an exact baseline."""

__version__ = "0.1.0"

from .drwsc import DrwscInstance, DrwscSolution, map_to_drwsc, solve_drwsc_exact, solve_drwsc_greedy
from .exact import solve_exact
from .instance import (
    DrfspInstance,
    GenerationConfig,
    InfeasibleInstanceError,
    InstanceError,
    Scenario,
    TimetableEntry,
    generate_instance,
    parse_solomon,
    read_instance,
)
from .plan import FleetPlan, validate_plan
from .route_sets import construct_route_sets
from .routing import generate_routes, insertion_cost
from .scm import run_scm

__all__ = [
    "DrfspInstance",
    "DrwscInstance",
    "DrwscSolution",
    "FleetPlan",
    "GenerationConfig",
    "InfeasibleInstanceError",
    "InstanceError",
    "Scenario",
    "TimetableEntry",
    "construct_route_sets",
    "generate_instance",
    "generate_routes",
    "insertion_cost",
    "map_to_drwsc",
    "parse_solomon",
    "read_instance",
    "run_scm",
    "solve_drwsc_exact",
    "solve_drwsc_greedy",
    "solve_exact",
    "validate_plan",
]
