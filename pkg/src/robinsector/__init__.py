"""Discrete spectrum of Robin Laplacians on planar sectors and of delta-interactions on star graphs."""
__version__ = "0.1.0"

from .analysis import MeshBudget, converge_sector, count_below, scan_alpha
from .discretization import PolarGrid, SectorProblem, assemble_sector, assemble_stargraph, build_grid
from .eigensolver import EigenResult, SolverConfig, certify_quasimode, dense_solve, inertia_count, solve_lowest
from .interval import IntervalProblem, e1_interval, e2_interval, solve_m
from .pencil import AssembledPencil, ConfigurationError
from .stargraph import StarGraph, verify_counting

__all__ = [
    "AssembledPencil", "ConfigurationError", "EigenResult", "IntervalProblem", "MeshBudget", "PolarGrid",
    "SectorProblem", "SolverConfig", "StarGraph", "converge_sector", "count_below", "scan_alpha", "verify_counting", "assemble_sector", "assemble_stargraph", "build_grid", "certify_quasimode", "dense_solve",
    "e1_interval", "e2_interval", "inertia_count", "solve_lowest", "solve_m",
]
