"""
Reference Update Functions

Deterministic UpdateFunctions for exercising the message-passing dataflow
without learned weights:

- linear_functions: fixed seeded linear maps; the origin flag is appended
  to node features as one extra coordinate before every map that reads a node
- cue_oracle_functions: linear message passing, but decoders return the
  scene's ground truth (world poses and dense cues of the ordered pair)
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np
from scipy.special import expit

from panograph_core.cues import DEFAULT_WIDTH, CueSet, PairKey, cluster_cues
from panograph_core.models import Scene
from panograph_core.pose_algebra import wrap_angles

from .losses import PosePrediction
from .message_passing import DenseRows, EdgeState, NodeState, UpdateFunctions


def _with_flag(node: NodeState) -> np.ndarray:
    return np.append(node.features, 1.0 if node.is_origin else 0.0)


def _weights(rng: np.random.Generator, rows: int, cols: int, identity_gain: float = 0.0) -> np.ndarray:
    w = rng.normal(0.0, 1.0, size=(rows, cols)) / np.sqrt(cols)
    if identity_gain:
        w[:, :min(rows, cols)] += identity_gain * np.eye(rows, min(rows, cols))
    return w


def linear_functions(dim: int, seed: int, width: int = DEFAULT_WIDTH) -> UpdateFunctions:
    """
    Seeded linear UpdateFunctions for node dimension `dim` and edge dimension 2*dim.

    Edge update and message are near-identity maps so features stay bounded
    over several layers. Decoded covis goes through a logistic so it lies in (0, 1).
    """
    rng = np.random.default_rng(seed)
    edge_dim = 2 * dim
    w_edge = 0.5 * _weights(rng, edge_dim, edge_dim, identity_gain=1.0)
    w_msg = 0.5 * _weights(rng, dim, dim + 1 + dim + edge_dim, identity_gain=1.0)
    w_pose = _weights(rng, 4, dim + 1)
    w_dense = _weights(rng, 3 * width, edge_dim)

    def edge_update(edge: EdgeState) -> EdgeState:
        return EdgeState(w_edge @ edge.features, src=edge.src, dst=edge.dst)

    def message(target: NodeState, joined: np.ndarray) -> np.ndarray:
        return w_msg @ np.concatenate([_with_flag(target), joined])

    def pose_decoder(node: NodeState) -> PosePrediction:
        out = w_pose @ _with_flag(node)
        # keep the rotation vector away from zero so it can be normalised
        out[0] += 1.0
        return PosePrediction.from_vector(out)

    def dense_decoder(edge: EdgeState) -> DenseRows:
        raw = (w_dense @ edge.features).reshape(3, width)
        return DenseRows(
            phi=0.25 * np.pi * expit(raw[0]) + 0.05,
            alpha=wrap_angles(raw[1]),
            covis=expit(raw[2]),
        )

    return UpdateFunctions(edge_update, message, pose_decoder, dense_decoder)


def cue_oracle_functions(scene: Scene, pano_ids, dim: int, seed: int = 0,
                         width: int = DEFAULT_WIDTH,
                         cues: Optional[Mapping[PairKey, CueSet]] = None) -> UpdateFunctions:
    """
    Linear propagation with ground-truth decoders.

    The pose decoder emits each panorama's world pose; re-anchoring at the
    chosen origin turns these into origin-frame poses. The dense decoder
    emits the ground-truth cues of the edge's ordered pair.
    """
    base = linear_functions(dim, seed, width)
    table = dict(cues) if cues is not None else cluster_cues(scene, list(pano_ids), width)
    world = scene.poses(pano_ids)

    def pose_decoder(node: NodeState) -> PosePrediction:
        return PosePrediction.from_pose(world[node.node_id])

    def dense_decoder(edge: EdgeState) -> DenseRows:
        cue = table[(edge.src, edge.dst)]
        return DenseRows(phi=cue.phi, alpha=cue.alpha, covis=cue.covis)

    return UpdateFunctions(base.edge_update, base.message, pose_decoder, dense_decoder)
