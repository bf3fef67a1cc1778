"""
Finite-Difference Gradient Checks

Central differences against the analytic gradients in `losses`, plus the
report printed by the `loss-check` command.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Tuple

import numpy as np

from panograph_core.pose_algebra import Pose2

from . import losses
from .losses import PosePrediction

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
DEFAULT_TOLERANCE = 1e-6


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Gradient of a scalar function by central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for k in range(x.size):
        up = x.copy().reshape(-1)
        down = x.copy().reshape(-1)
        up[k] += step
        down[k] -= step
        flat[k] = (f(up.reshape(x.shape)) - f(down.reshape(x.shape))) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), or the absolute error when both vanish."""
    a = np.asarray(analytic, dtype=float).reshape(-1)
    n = np.asarray(numeric, dtype=float).reshape(-1)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    diff = float(np.linalg.norm(a - n))
    return diff if scale < 1e-12 else diff / scale


def check_gradient(f: Callable[[np.ndarray], Tuple[float, np.ndarray]], x: np.ndarray,
                   step: float = FD_STEP) -> float:
    """
    f returns (value, analytic gradient); the result is the relative error
    of that gradient against central differences at x.
    """
    _, analytic = f(x)
    numeric = central_difference(lambda y: f(y)[0], x, step)
    return relative_error(analytic, numeric)


# ============================================================================
# Pose-loss adapters
# ============================================================================

def flatten_predictions(pred: Mapping[str, PosePrediction]) -> Tuple[List[str], np.ndarray]:
    nodes = list(pred)
    return nodes, np.concatenate([pred[n].vector() for n in nodes])


def unflatten_predictions(nodes: List[str], x: np.ndarray) -> Dict[str, PosePrediction]:
    return {n: PosePrediction.from_vector(x[4 * k: 4 * k + 4]) for k, n in enumerate(nodes)}


def pose_loss_function(loss: Callable[..., losses.LossValue], nodes: List[str],
                       *args) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """Wrap a pose loss so it maps a flat prediction vector to (value, flat gradient)."""
    def f(x: np.ndarray) -> Tuple[float, np.ndarray]:
        out = loss(unflatten_predictions(nodes, x), *args)
        return out.value, np.concatenate([out.grad[n] for n in nodes])
    return f


# ============================================================================
# Random instances and report
# ============================================================================

def random_pose_instance(rng: np.random.Generator, n_nodes: int) -> Tuple[Dict[str, Pose2], Dict[str, PosePrediction]]:
    """Ground-truth poses (origin at identity) and a nearby raw prediction."""
    nodes = [f"n{k}" for k in range(n_nodes)]
    gt = {nodes[0]: Pose2.identity()}
    for n in nodes[1:]:
        gt[n] = Pose2.from_angle(rng.uniform(-np.pi, np.pi), rng.uniform(-3.0, 3.0, size=2))
    pred = {}
    for n, pose in gt.items():
        scale = rng.uniform(0.7, 1.3)
        r = np.asarray(pose.r) * scale + rng.normal(0.0, 0.1, size=2)
        t = np.asarray(pose.t) + rng.normal(0.0, 0.3, size=2)
        pred[n] = PosePrediction(tuple(r), tuple(t))
    return gt, pred


def random_dense_instance(rng: np.random.Generator, pairs: int, width: int) -> Dict[str, np.ndarray]:
    """
    Predicted and ground-truth rows kept away from the kinks of the L1 terms
    and from the BCE clamp.
    """
    gt_phi = rng.uniform(0.2, 1.4, size=(pairs, width))
    gt_alpha = rng.uniform(-2.5, 2.5, size=(pairs, width))
    gt_covis = (rng.uniform(size=(pairs, width)) > 0.3).astype(float)
    offset = lambda: rng.uniform(0.01, 0.3, size=(pairs, width)) * rng.choice([-1.0, 1.0], size=(pairs, width))
    return {
        "gt_phi": gt_phi,
        "gt_alpha": gt_alpha,
        "gt_covis": gt_covis,
        "phi": gt_phi + offset(),
        "alpha": gt_alpha + offset(),
        "covis": rng.uniform(0.05, 0.95, size=(pairs, width)),
    }


@dataclass(frozen=True)
class LossCheckRow:
    loss: str
    instances: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def run_loss_check(seed: int, instances: int = 100, n_nodes: int = 4, width: int = 16,
                   tolerance: float = DEFAULT_TOLERANCE) -> List[LossCheckRow]:
    """
    Check every differentiable loss on `instances` random instances.
    """
    rng = np.random.default_rng(seed)
    worst = {"global_node": 0.0, "relative_node": 0.0, "boundary": 0.0, "ac": 0.0, "covis": 0.0}
    for _ in range(instances):
        gt, pred = random_pose_instance(rng, n_nodes)
        nodes, x = flatten_predictions(pred)
        origin = nodes[0]
        worst["global_node"] = max(
            worst["global_node"],
            check_gradient(pose_loss_function(losses.global_node_loss, nodes, gt, origin), x),
        )
        worst["relative_node"] = max(
            worst["relative_node"],
            check_gradient(pose_loss_function(losses.relative_node_loss, nodes, gt), x),
        )

        d = random_dense_instance(rng, 2, width)
        dense = {
            "boundary": lambda y: _value_grad(losses.boundary_loss(y, d["gt_phi"])),
            "ac": lambda y: _value_grad(losses.ac_loss(y, d["gt_alpha"], d["gt_covis"])),
            "covis": lambda y: _value_grad(losses.covis_loss(y, d["gt_covis"])),
        }
        inputs = {"boundary": d["phi"], "ac": d["alpha"], "covis": d["covis"]}
        for name, f in dense.items():
            worst[name] = max(worst[name], check_gradient(f, inputs[name]))

    rows = [LossCheckRow(name, instances, err, tolerance) for name, err in worst.items()]
    for row in rows:
        logger.info("loss-check %s: max rel err %.3e (%s)", row.loss, row.max_rel_error,
                    "ok" if row.passed else "FAIL")
    return rows


def _value_grad(out: losses.LossValue) -> Tuple[float, np.ndarray]:
    return out.value, out.grad
