"""
Rigid 2D Alignment and Per-Panorama Errors

Predicted configurations live in an arbitrary gauge, so they are first
aligned to ground truth with the least-squares rigid transform (rotation and
translation, no scale), then compared panorama by panorama.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Mapping, Sequence

import numpy as np

from panograph_core.errors import DegenerateError, ValidationError
from panograph_core.pose_algebra import Pose2, apply_points, wrap_angle
from panograph_solvers.models import Solution

SPREAD_FLOOR = 1e-12


def align_2d(pred: Sequence[Sequence[float]], gt: Sequence[Sequence[float]]) -> Pose2:
    """
    Rigid T minimising sum ||T(pred_k) - gt_k||^2.

    The rotation angle is atan2 of the skew and symmetric sums of the
    centred cross-covariance; the translation then matches the centroids.
    """
    p = np.asarray(pred, dtype=float).reshape(-1, 2)
    g = np.asarray(gt, dtype=float).reshape(-1, 2)
    if p.shape != g.shape:
        raise ValidationError(f"Point sets differ in shape: {p.shape} vs {g.shape}")
    if len(p) < 2:
        raise DegenerateError(f"Alignment needs at least 2 points, got {len(p)}")
    p_mean, g_mean = p.mean(axis=0), g.mean(axis=0)
    pc, gc = p - p_mean, g - g_mean
    if np.sum(gc * gc) < SPREAD_FLOOR:
        raise DegenerateError("All ground-truth points coincide; rotation is unidentifiable")
    if np.sum(pc * pc) < SPREAD_FLOOR:
        # every rotation fits a collapsed prediction equally well
        theta = 0.0
    else:
        skew = float(np.sum(pc[:, 0] * gc[:, 1] - pc[:, 1] * gc[:, 0]))
        sym = float(np.sum(pc[:, 0] * gc[:, 0] + pc[:, 1] * gc[:, 1]))
        theta = math.atan2(skew, sym)
    c, s = math.cos(theta), math.sin(theta)
    t = g_mean - np.array([c * p_mean[0] - s * p_mean[1], s * p_mean[0] + c * p_mean[1]])
    return Pose2((c, s), (t[0], t[1]))


@dataclass(frozen=True)
class AlignedErrors:
    """
    Attributes:
        translation: per-node ATE in meters
        rotation: per-node ARE in radians, within [0, pi]
        transform: alignment applied to the prediction
    """
    nodes: List[str]
    translation: np.ndarray
    rotation: np.ndarray
    transform: Pose2

    @property
    def size(self) -> int:
        return len(self.nodes)


def evaluate(pred: Solution, gt: Mapping[str, Pose2]) -> AlignedErrors:
    """
    Align predicted positions to ground truth and measure ATE/ARE per node.
    """
    nodes = list(gt)
    missing = [n for n in nodes if n not in pred.poses]
    if missing:
        raise ValidationError(f"Prediction has no pose for {missing}")
    pred_xy = np.array([pred.poses[n].t for n in nodes])
    gt_xy = np.array([gt[n].t for n in nodes])
    transform = align_2d(pred_xy, gt_xy)
    aligned = apply_points(transform, pred_xy)
    translation = np.linalg.norm(aligned - gt_xy, axis=1)
    rotation = np.array([
        abs(wrap_angle(pred.poses[n].theta + transform.theta - gt[n].theta)) for n in nodes
    ])
    return AlignedErrors(nodes=nodes, translation=translation, rotation=rotation, transform=transform)
