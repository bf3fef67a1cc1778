"""
Training Losses

Node losses on decoded poses and edge losses on dense column-wise outputs,
each returned with its analytic gradient with respect to the prediction:

- global_node_loss:   squared pose error in the origin frame, origin excluded
- relative_node_loss: squared error of predicted relative poses over all
                      ordered pairs (rotations normalised first)
- boundary_loss:      L1 on boundary angles
- ac_loss:            L1 on wrapped angular correspondence, masked by
                      ground-truth co-visibility
- covis_loss:         binary cross entropy with clamped predictions

Pose gradients are 4-vectors per node in the order (r0, r1, t0, t1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from panograph_core.errors import DegenerateError, ShapeError, ValidationError
from panograph_core.pose_algebra import Pose2, relative, wrap_angles

BCE_EPS = 1e-7
NORM_FLOOR = 1e-9
REDUCTIONS = ("sum", "mean")


@dataclass(frozen=True)
class PosePrediction:
    """Raw decoder output for one node; r_hat need not be unit length."""
    r_hat: Tuple[float, float]
    t_hat: Tuple[float, float]

    def __post_init__(self) -> None:
        r = (float(self.r_hat[0]), float(self.r_hat[1]))
        t = (float(self.t_hat[0]), float(self.t_hat[1]))
        if not all(math.isfinite(v) for v in r + t):
            raise ValidationError(f"PosePrediction has non-finite components: r={r}, t={t}")
        object.__setattr__(self, "r_hat", r)
        object.__setattr__(self, "t_hat", t)

    @classmethod
    def from_pose(cls, pose: Pose2) -> "PosePrediction":
        return cls(pose.r, pose.t)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "PosePrediction":
        return cls((v[0], v[1]), (v[2], v[3]))

    def vector(self) -> np.ndarray:
        return np.array([*self.r_hat, *self.t_hat])

    def to_pose(self) -> Pose2:
        """Normalised pose; raises DegenerateError for a vanishing rotation."""
        n = math.hypot(*self.r_hat)
        if n < NORM_FLOOR:
            raise DegenerateError(f"Predicted rotation {self.r_hat} has norm {n:.3e}")
        return Pose2((self.r_hat[0] / n, self.r_hat[1] / n), self.t_hat)


@dataclass(frozen=True)
class LossWeights:
    beta_r: float = 0.1
    beta_ac: float = 1.0
    beta_b: float = 1.0
    beta_cv: float = 1.0

    def __post_init__(self) -> None:
        if min(self.beta_r, self.beta_ac, self.beta_b, self.beta_cv) < 0:
            raise ValidationError(f"Loss weights must be non-negative: {self}")

    def node(self, l_ng: float, l_nr: float) -> float:
        return l_ng + self.beta_r * l_nr

    def edge(self, l_ac: float, l_b: float, l_cv: float) -> float:
        return self.beta_ac * l_ac + self.beta_b * l_b + self.beta_cv * l_cv


@dataclass(frozen=True)
class LossValue:
    """A loss and its gradient (per-node dict for pose losses, array for dense losses)."""
    value: float
    grad: object


PoseMap = Mapping[str, PosePrediction]
GtMap = Mapping[str, Pose2]


def _check_nodes(pred: PoseMap, gt: GtMap) -> None:
    if set(pred) != set(gt):
        raise ShapeError(
            f"Prediction nodes {sorted(pred)} do not match ground-truth nodes {sorted(gt)}"
        )


# ============================================================================
# Node losses
# ============================================================================

def global_node_loss(pred: PoseMap, gt: GtMap, origin: str) -> LossValue:
    """
    sum over non-origin nodes of ||r - r_hat||^2 + ||t - t_hat||^2.
    """
    _check_nodes(pred, gt)
    if origin not in gt:
        raise ShapeError(f"Origin {origin} is not one of the nodes")
    value = 0.0
    grad: Dict[str, np.ndarray] = {}
    for node, p in pred.items():
        if node == origin:
            grad[node] = np.zeros(4)
            continue
        diff = p.vector() - np.array([*gt[node].r, *gt[node].t])
        value += float(diff @ diff)
        grad[node] = 2.0 * diff
    return LossValue(value, grad)


def relative_node_loss(pred: PoseMap, gt: GtMap) -> LossValue:
    """
    sum over ordered pairs i != j of ||r_ij - r_hat_ij||^2 + ||t_ij - t_hat_ij||^2.

    Predicted relatives come from the normalised rotations, so the gradient
    with respect to r_hat is projected onto the tangent of the unit circle
    and scaled by 1/||r_hat||.
    """
    _check_nodes(pred, gt)
    nodes = list(pred)
    unit: Dict[str, np.ndarray] = {}
    norms: Dict[str, float] = {}
    for node in nodes:
        r = np.asarray(pred[node].r_hat)
        n = float(np.hypot(*r))
        if n < NORM_FLOOR:
            raise DegenerateError(f"Predicted rotation of {node} has norm {n:.3e}")
        unit[node] = r / n
        norms[node] = n

    value = 0.0
    g_unit = {n: np.zeros(2) for n in nodes}
    g_t = {n: np.zeros(2) for n in nodes}
    for i in nodes:
        ci, si = unit[i]
        ti = np.asarray(pred[i].t_hat)
        rot_i = np.array([[ci, -si], [si, ci]])
        for j in nodes:
            if i == j:
                continue
            cj, sj = unit[j]
            d = np.asarray(pred[j].t_hat) - ti
            r_hat_ij = np.array([ci * cj + si * sj, ci * sj - si * cj])
            t_hat_ij = rot_i.T @ d
            target = relative(gt[i], gt[j])
            a = r_hat_ij - np.asarray(target.r)
            b = t_hat_ij - np.asarray(target.t)
            value += float(a @ a + b @ b)

            g_unit[i] += 2.0 * np.array([
                a @ np.array([cj, sj]) + b @ d,
                a @ np.array([sj, -cj]) + b @ np.array([d[1], -d[0]]),
            ])
            g_unit[j] += 2.0 * np.array([a @ np.array([ci, -si]), a @ np.array([si, ci])])
            g_t[j] += 2.0 * (rot_i @ b)
            g_t[i] -= 2.0 * (rot_i @ b)

    grad: Dict[str, np.ndarray] = {}
    for node in nodes:
        u = unit[node]
        g_r = (np.eye(2) - np.outer(u, u)) @ g_unit[node] / norms[node]
        grad[node] = np.concatenate([g_r, g_t[node]])
    return LossValue(value, grad)


def node_loss(pred: PoseMap, gt: GtMap, origin: str, weights: Optional[LossWeights] = None) -> LossValue:
    """L_ng + beta_r * L_nr with the matching combined gradient."""
    weights = weights or LossWeights()
    l_ng = global_node_loss(pred, gt, origin)
    l_nr = relative_node_loss(pred, gt)
    grad = {n: l_ng.grad[n] + weights.beta_r * l_nr.grad[n] for n in pred}
    return LossValue(weights.node(l_ng.value, l_nr.value), grad)


# ============================================================================
# Edge losses
# ============================================================================

def _rows(pred, gt) -> Tuple[np.ndarray, np.ndarray]:
    p = np.atleast_2d(np.asarray(pred, dtype=float))
    g = np.atleast_2d(np.asarray(gt, dtype=float))
    if p.shape != g.shape:
        raise ShapeError(f"Prediction rows {p.shape} do not match ground-truth rows {g.shape}")
    return p, g


def _reduce(value: float, grad: np.ndarray, count: int, reduction: str) -> LossValue:
    if reduction not in REDUCTIONS:
        raise ValidationError(f"Unknown reduction {reduction!r}; expected one of {REDUCTIONS}")
    if reduction == "mean":
        if count == 0:
            return LossValue(0.0, np.zeros_like(grad))
        return LossValue(value / count, grad / count)
    return LossValue(value, grad)


def boundary_loss(pred, gt, reduction: str = "sum") -> LossValue:
    """L1 between predicted and ground-truth boundary-angle rows, shape (pairs, W)."""
    p, g = _rows(pred, gt)
    diff = p - g
    return _reduce(float(np.sum(np.abs(diff))), np.sign(diff), diff.size, reduction)


def ac_loss(pred, gt, covis, reduction: str = "sum") -> LossValue:
    """
    L1 on the wrapped correspondence difference over columns where the
    ground truth is co-visible; masked columns contribute nothing.
    """
    p, g = _rows(pred, gt)
    mask = np.atleast_2d(np.asarray(covis, dtype=float))
    if mask.shape != p.shape:
        raise ShapeError(f"Co-visibility mask {mask.shape} does not match rows {p.shape}")
    valid = mask > 0.5
    diff = np.where(valid, wrap_angles(np.where(valid, p - g, 0.0)), 0.0)
    return _reduce(float(np.sum(np.abs(diff))), np.sign(diff), int(np.count_nonzero(valid)), reduction)


def covis_loss(pred, gt, reduction: str = "sum", eps: float = BCE_EPS) -> LossValue:
    """
    Binary cross entropy; predictions are clamped to [eps, 1 - eps] and the
    gradient is zero where the clamp is active.
    """
    p, g = _rows(pred, gt)
    q = np.clip(p, eps, 1.0 - eps)
    value = -float(np.sum(g * np.log(q) + (1.0 - g) * np.log(1.0 - q)))
    active = (p > eps) & (p < 1.0 - eps)
    grad = np.where(active, (q - g) / (q * (1.0 - q)), 0.0)
    return _reduce(value, grad, p.size, reduction)


@dataclass(frozen=True)
class EdgeLossComponents:
    ac: float
    boundary: float
    covis: float


def edge_loss(components: EdgeLossComponents, weights: Optional[LossWeights] = None) -> float:
    """beta_ac * L_ac + beta_b * L_b + beta_cv * L_cv."""
    weights = weights or LossWeights()
    return weights.edge(components.ac, components.boundary, components.covis)


def dense_losses(pred_rows: Mapping[str, np.ndarray], gt_rows: Mapping[str, np.ndarray],
                 reduction: str = "sum") -> EdgeLossComponents:
    """
    All three edge-loss components from stacked (pairs, W) rows keyed
    "phi", "alpha" and "covis".
    """
    return EdgeLossComponents(
        ac=ac_loss(pred_rows["alpha"], gt_rows["alpha"], gt_rows["covis"], reduction).value,
        boundary=boundary_loss(pred_rows["phi"], gt_rows["phi"], reduction).value,
        covis=covis_loss(pred_rows["covis"], gt_rows["covis"], reduction).value,
    )
