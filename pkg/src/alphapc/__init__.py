"""Exact solvers and bounds for the discrete alpha-neighbor p-center problem."""
from .bnc import BncConfig, SolveReport, solve
from .bounds import all_bounds, cover_radius, fixpoint_bound, semi_relaxation
from .instance import Instance, Solution, objective, parse_pmed, parse_tsplib

__all__ = ["BncConfig", "Instance", "Solution", "SolveReport", "all_bounds", "cover_radius",
           "fixpoint_bound", "objective", "parse_pmed", "parse_tsplib", "semi_relaxation",
           "solve"]
__version__ = "0.1.0"
