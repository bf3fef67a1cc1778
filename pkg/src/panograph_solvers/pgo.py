"""
Pose Graph Optimisation

Levenberg-Marquardt over SE(2) node states (theta, x, y) with:

- one prior factor anchoring the origin at identity
- one between-factor per selected unordered pair, observed in the pair's
  higher-covis direction

Residuals are whitened by diagonal noise models; cost = 0.5 * ||r||^2.
The normal equations are assembled with scipy.sparse and solved with spsolve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from panograph_core.errors import NumericalError, ValidationError
from panograph_core.graph_models import EdgeObservation, PoseGraph
from panograph_core.pose_algebra import Pose2, wrap_angle

from .greedy import greedy_spanning_tree, spanning_tree
from .models import Solution, SolverDiagnostics, reanchor

logger = logging.getLogger(__name__)

STATE_DIM = 3
EDGE_POLICIES = ("tree+1", "all")


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal Gaussian noise: sigma_t per translation axis (m), sigma_theta (rad)."""
    sigma_t: float
    sigma_theta: float

    def __post_init__(self) -> None:
        if not (self.sigma_t > 0 and self.sigma_theta > 0):
            raise ValidationError(f"Noise model sigmas must be positive: {self}")

    @property
    def whitening(self) -> np.ndarray:
        """Per-component 1/sigma in residual order (theta, x, y)."""
        return np.array([1.0 / self.sigma_theta, 1.0 / self.sigma_t, 1.0 / self.sigma_t])


@dataclass(frozen=True)
class PgoConfig:
    prior: NoiseModel = field(default_factory=lambda: NoiseModel(0.20, 0.1))
    odometry: NoiseModel = field(default_factory=lambda: NoiseModel(0.30, 0.3))
    max_iters: int = 1000
    rel_tol: float = 1e-5
    abs_tol: float = 1e-20
    lambda_init: float = 1e-4
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e10
    edges: str = "all"

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.lambda_init <= 0 or self.lambda_up <= 1 or self.lambda_down <= 1:
            raise ValidationError("LM damping needs lambda_init > 0 and up/down factors > 1")
        if self.edges not in EDGE_POLICIES:
            raise ValidationError(f"Unknown PGO edge policy {self.edges!r}; expected one of {EDGE_POLICIES}")


# ============================================================================
# Between factor
# ============================================================================

def between_residual(xi: Sequence[float], xj: Sequence[float], z: Pose2) -> np.ndarray:
    """
    Unwhitened residual of observing node j from node i.

    xi, xj are (theta, x, y) states. Returns
    (wrap(theta_j - theta_i - theta_z), R_i^T (t_j - t_i) - t_z).
    """
    c, s = math.cos(xi[0]), math.sin(xi[0])
    dx, dy = xj[1] - xi[1], xj[2] - xi[2]
    return np.array([
        wrap_angle(xj[0] - xi[0] - z.theta),
        c * dx + s * dy - z.t[0],
        -s * dx + c * dy - z.t[1],
    ])


def jacobian_between(xi: Sequence[float], xj: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Analytic 3x3 Jacobians of between_residual with respect to xi and xj.
    """
    c, s = math.cos(xi[0]), math.sin(xi[0])
    dx, dy = xj[1] - xi[1], xj[2] - xi[2]
    j_i = np.array([
        [-1.0, 0.0, 0.0],
        [-s * dx + c * dy, -c, -s],
        [-c * dx - s * dy, s, -c],
    ])
    j_j = np.array([
        [1.0, 0.0, 0.0],
        [0.0, c, s],
        [0.0, -s, c],
    ])
    return j_i, j_j


# ============================================================================
# Problem assembly
# ============================================================================

def select_factor_edges(g: PoseGraph, policy: str = "all") -> List[EdgeObservation]:
    """
    Tree edges from the greedy baseline plus non-tree pairs.

    "tree+1" adds the highest-ranked non-tree pair; "all" adds every non-tree
    pair with positive covis.
    """
    tree = spanning_tree(g)
    in_tree = {tuple(sorted((e.src, e.dst))) for e in tree}
    rest = [p for p in g.ranked_pairs() if p not in in_tree]
    if policy == "tree+1":
        extra = rest[:1]
    else:
        extra = [p for p in rest if g.pair_score(*p) > 0.0]
    return tree + [g.best_edge(*p) for p in extra]


class PoseGraphProblem:
    """
    Whitened least-squares problem over a stacked state vector.
    """

    def __init__(self, g: PoseGraph, factors: List[EdgeObservation], cfg: PgoConfig) -> None:
        self.nodes = list(g.nodes)
        self.index = {n: k for k, n in enumerate(self.nodes)}
        self.origin_index = g.origin_index
        self.factors = factors
        self.prior_w = cfg.prior.whitening
        self.odom_w = cfg.odometry.whitening
        self.dim = STATE_DIM * len(self.nodes)
        self.n_residuals = STATE_DIM * (1 + len(factors))

    def pack(self, poses: Dict[str, Pose2]) -> np.ndarray:
        x = np.zeros(self.dim)
        for node, k in self.index.items():
            p = poses[node]
            x[STATE_DIM * k: STATE_DIM * k + STATE_DIM] = (p.theta, p.t[0], p.t[1])
        return x

    def unpack(self, x: np.ndarray) -> Dict[str, Pose2]:
        return {
            node: Pose2.from_angle(x[STATE_DIM * k], (x[STATE_DIM * k + 1], x[STATE_DIM * k + 2]))
            for node, k in self.index.items()
        }

    def block(self, x: np.ndarray, k: int) -> np.ndarray:
        return x[STATE_DIM * k: STATE_DIM * k + STATE_DIM]

    def residuals(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_residuals)
        x0 = self.block(x, self.origin_index)
        out[:STATE_DIM] = self.prior_w * np.array([wrap_angle(x0[0]), x0[1], x0[2]])
        for f, edge in enumerate(self.factors, start=1):
            xi = self.block(x, self.index[edge.src])
            xj = self.block(x, self.index[edge.dst])
            out[STATE_DIM * f: STATE_DIM * f + STATE_DIM] = self.odom_w * between_residual(xi, xj, edge.rel_pose)
        return out

    def cost(self, x: np.ndarray) -> float:
        r = self.residuals(x)
        return 0.5 * float(r @ r)

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        rows: List[int] = []
        cols: List[int] = []
        data: List[float] = []

        def put(row0: int, col0: int, block: np.ndarray) -> None:
            for a in range(STATE_DIM):
                for b in range(STATE_DIM):
                    if block[a, b] != 0.0:
                        rows.append(row0 + a)
                        cols.append(col0 + b)
                        data.append(block[a, b])

        put(0, STATE_DIM * self.origin_index, np.diag(self.prior_w))
        for f, edge in enumerate(self.factors, start=1):
            ki, kj = self.index[edge.src], self.index[edge.dst]
            j_i, j_j = jacobian_between(self.block(x, ki), self.block(x, kj))
            put(STATE_DIM * f, STATE_DIM * ki, self.odom_w[:, None] * j_i)
            put(STATE_DIM * f, STATE_DIM * kj, self.odom_w[:, None] * j_j)
        return sp.coo_matrix((data, (rows, cols)), shape=(self.n_residuals, self.dim)).tocsr()


def _wrap_state(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for k in range(0, len(x), STATE_DIM):
        x[k] = wrap_angle(x[k])
    return x


# ============================================================================
# Solver
# ============================================================================

def pgo(g: PoseGraph, init: Optional[Solution] = None, cfg: Optional[PgoConfig] = None) -> Solution:
    """
    Refine an initial solution (greedy by default) with Levenberg-Marquardt.

    Steps that lower the cost are accepted and relax the damping; others are
    rejected and stiffen it. Iteration stops on max_iters, a relative cost
    decrease below rel_tol, a cost below abs_tol, or damping above lambda_max.
    The result is re-anchored so the origin is exactly identity.
    """
    cfg = cfg or PgoConfig()
    if init is None:
        init = greedy_spanning_tree(g)
    missing = [n for n in g.nodes if n not in init.poses]
    if missing:
        raise ValidationError(f"Initial solution lacks poses for {missing}")

    factors = select_factor_edges(g, cfg.edges)
    problem = PoseGraphProblem(g, factors, cfg)
    x = problem.pack(init.poses)
    cost = problem.cost(x)
    if not math.isfinite(cost):
        raise NumericalError("Initial PGO cost is not finite")

    diagnostics = SolverDiagnostics(
        method="pgo",
        initial_cost=cost,
        factor_pairs=[tuple(sorted((e.src, e.dst))) for e in factors],
        cost_trace=[cost],
        converged=False,
    )
    lam = cfg.lambda_init
    iterations = 0
    termination = "abs_tol" if cost <= cfg.abs_tol else ""

    while not termination and iterations < cfg.max_iters:
        iterations += 1
        r = problem.residuals(x)
        jac = problem.jacobian(x)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(jac.data))):
            raise NumericalError(f"Non-finite residual or Jacobian at iteration {iterations}")
        hessian = (jac.T @ jac).tocsr()
        gradient = jac.T @ r
        damped = hessian + sp.diags(lam * hessian.diagonal(), format="csr")
        delta = spsolve(damped.tocsc(), -gradient)
        if not np.all(np.isfinite(delta)):
            raise NumericalError(f"Non-finite LM step at iteration {iterations}")

        x_new = _wrap_state(x + delta)
        cost_new = problem.cost(x_new)
        if not math.isfinite(cost_new):
            raise NumericalError(f"Non-finite cost at iteration {iterations}")

        if cost_new < cost:
            decrease = (cost - cost_new) / cost
            x, cost = x_new, cost_new
            diagnostics.cost_trace.append(cost)
            lam /= cfg.lambda_down
            logger.debug("LM iter %d accepted: cost=%.6e lambda=%.1e", iterations, cost, lam)
            if cost <= cfg.abs_tol:
                termination = "abs_tol"
            elif decrease < cfg.rel_tol:
                termination = "rel_tol"
        else:
            lam *= cfg.lambda_up
            logger.debug("LM iter %d rejected: cost=%.6e lambda=%.1e", iterations, cost_new, lam)
            if lam > cfg.lambda_max:
                termination = "lambda_max"

    diagnostics.iterations = iterations
    diagnostics.final_cost = cost
    diagnostics.termination = termination or "max_iters"
    diagnostics.converged = termination in ("abs_tol", "rel_tol")
    logger.info(
        "PGO finished after %d iterations (%s): cost %.6e -> %.6e",
        iterations, diagnostics.termination, diagnostics.initial_cost, cost,
    )
    poses = reanchor(problem.unpack(x), g.origin)
    return Solution(poses=poses, origin=g.origin, diagnostics=diagnostics)
