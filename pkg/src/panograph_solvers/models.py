"""
Solver Result Models

A Solution holds one pose per node, expressed in the origin panorama's frame,
plus diagnostics describing how the solver got there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from panograph_core.errors import ValidationError
from panograph_core.pose_algebra import Pose2, compose, inverse
from panograph_core.schemas import SolutionFile
from panograph_core.storage import PathLike, read_json_model, write_json


@dataclass
class SolverDiagnostics:
    """
    Attributes:
        method: "greedy", "pgo" or "mp-demo"
        accepted_edges: spanning-tree edges (greedy) as directed (src, dst)
        factor_pairs: unordered pairs carrying a between-factor (pgo)
        cost_trace: cost after every accepted LM step, starting with the initial cost
    """
    method: str
    iterations: int = 0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    converged: bool = True
    termination: str = ""
    accepted_edges: List[Tuple[str, str]] = field(default_factory=list)
    factor_pairs: List[Tuple[str, str]] = field(default_factory=list)
    cost_trace: List[float] = field(default_factory=list)
    origin_scores: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "origin_scores": dict(self.origin_scores),
            "method": self.method,
            "iterations": self.iterations,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "converged": self.converged,
            "termination": self.termination,
            "accepted_edges": [list(e) for e in self.accepted_edges],
            "factor_pairs": [list(p) for p in self.factor_pairs],
            "cost_trace": list(self.cost_trace),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SolverDiagnostics":
        return cls(
            method=str(data.get("method", "")),
            iterations=int(data.get("iterations", 0)),
            initial_cost=float(data.get("initial_cost", 0.0)),
            final_cost=float(data.get("final_cost", 0.0)),
            converged=bool(data.get("converged", True)),
            termination=str(data.get("termination", "")),
            accepted_edges=[tuple(e) for e in data.get("accepted_edges", [])],
            factor_pairs=[tuple(p) for p in data.get("factor_pairs", [])],
            cost_trace=[float(c) for c in data.get("cost_trace", [])],
            origin_scores={str(k): float(v) for k, v in data.get("origin_scores", {}).items()},
        )


@dataclass
class Solution:
    """
    Poses for every node of a graph; the origin's pose is exactly identity.
    """
    poses: Dict[str, Pose2]
    origin: str
    diagnostics: SolverDiagnostics = field(default_factory=lambda: SolverDiagnostics(method=""))

    def __post_init__(self) -> None:
        if self.origin not in self.poses:
            raise ValidationError(f"Solution has no pose for its origin {self.origin}")
        if self.poses[self.origin] != Pose2.identity():
            raise ValidationError(f"Solution origin {self.origin} is not at identity")

    @property
    def nodes(self) -> List[str]:
        return list(self.poses)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "origin": self.origin,
            "poses": {pid: pose.to_dict() for pid, pose in self.poses.items()},
            "diagnostics": self.diagnostics.to_dict(),
        }


def reanchor(poses: Mapping[str, Pose2], origin: str) -> Dict[str, Pose2]:
    """
    Express every pose in the origin's frame; the origin becomes exactly identity.
    """
    to_origin = inverse(poses[origin])
    out = {pid: compose(to_origin, pose) for pid, pose in poses.items()}
    out[origin] = Pose2.identity()
    return out


def save_solution(solution: Solution, path: PathLike) -> Path:
    return write_json(path, solution.to_dict())


def load_solution(path: PathLike, diagnostics: Optional[SolverDiagnostics] = None) -> Solution:
    record = read_json_model(path, SolutionFile)
    poses = {pid: Pose2.from_angle(rec.theta, rec.t) for pid, rec in record.poses.items()}
    diag = diagnostics or SolverDiagnostics.from_dict(record.diagnostics)
    return Solution(poses=poses, origin=record.origin, diagnostics=diag)
