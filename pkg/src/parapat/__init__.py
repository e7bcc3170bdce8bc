"""Parallel patterns built from plain serial functions: task farms, population Monte Carlo and Schwarz solvers."""
from .comm import CommGroup, spawn_group
from .partition import simple_partitioning
from .taskmap import ProblemHooks, parallel_solve_problem, solve_problem

__version__ = "0.1.0"

__all__ = [
    "CommGroup",
    "ProblemHooks",
    "parallel_solve_problem",
    "simple_partitioning",
    "solve_problem",
    "spawn_group",
]
