"""
PanoGraph Solvers

Multi-view baselines that turn a PoseGraph into a Solution:
greedy spanning-tree composition and Levenberg-Marquardt pose-graph
optimisation.
"""

from .greedy import greedy_spanning_tree  # noqa: F401
from .models import Solution, SolverDiagnostics, load_solution, save_solution  # noqa: F401
from .pgo import NoiseModel, PgoConfig, pgo  # noqa: F401

__all__ = [
    "Solution",
    "SolverDiagnostics",
    "NoiseModel",
    "PgoConfig",
    "greedy_spanning_tree",
    "pgo",
    "load_solution",
    "save_solution",
]
