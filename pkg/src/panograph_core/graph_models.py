"""
Pose Graph Models

The graph shared by the baseline solvers and the message-passing engine:
nodes are panoramas, directed edges carry a relative-pose observation (dst
expressed in src's frame) and a co-visibility score.

build_graph() synthesises the observations a pair-wise front-end would
provide: ground-truth relative poses from the scene, optionally perturbed by
Gaussian noise, plus an optional outlier on the lowest-ranked pair.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .cues import DEFAULT_WIDTH, CueSet, PairKey, cluster_cues, edge_covis_score
from .errors import ValidationError
from .models import Cluster, Scene
from .pose_algebra import Pose2, relative

logger = logging.getLogger(__name__)

DEFAULT_CONNECTIVITY_THRESHOLD = 0.1


def rank_pairs(scores: Mapping[PairKey, float]) -> List[PairKey]:
    """
    Unordered pairs by descending score, ties broken by the sorted pair.

    `scores` maps sorted pairs to their max directional covis.
    """
    return sorted(scores, key=lambda p: (-scores[p], p))


@dataclass(frozen=True)
class EdgeObservation:
    """
    Directed observation src -> dst.

    Attributes:
        rel_pose: pose of dst expressed in src's frame
        covis_score: mean co-visibility in [0, 1]
        cues: optional dense cues that produced the score
    """
    src: str
    dst: str
    rel_pose: Pose2
    covis_score: float
    cues: Optional[CueSet] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValidationError(f"Edge {self.src}->{self.dst} is a self-loop")
        if not 0.0 <= self.covis_score <= 1.0:
            raise ValidationError(f"Edge {self.src}->{self.dst} has covis {self.covis_score} outside [0, 1]")

    def to_dict(self) -> Dict:
        return {"src": self.src, "dst": self.dst, "rel": self.rel_pose.to_dict(), "covis": self.covis_score}

    @classmethod
    def from_dict(cls, data: Mapping) -> "EdgeObservation":
        return cls(
            src=data["src"],
            dst=data["dst"],
            rel_pose=Pose2.from_dict(data["rel"]),
            covis_score=float(data["covis"]),
        )


@dataclass(frozen=True)
class PoseGraph:
    """
    Ordered nodes with an origin, and at most one edge per ordered pair.
    """
    nodes: Tuple[str, ...]
    edges: Dict[PairKey, EdgeObservation]
    origin_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValidationError(f"Graph nodes {self.nodes} repeat an id")
        if not 0 <= self.origin_index < len(self.nodes):
            raise ValidationError(f"Graph origin_index {self.origin_index} is out of range")
        known = set(self.nodes)
        for key, edge in self.edges.items():
            if key != (edge.src, edge.dst):
                raise ValidationError(f"Edge stored under {key} is {edge.src}->{edge.dst}")
            if edge.src not in known or edge.dst not in known:
                raise ValidationError(f"Edge {edge.src}->{edge.dst} references an unknown node")

    @property
    def origin(self) -> str:
        return self.nodes[self.origin_index]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def edge(self, src: str, dst: str) -> Optional[EdgeObservation]:
        return self.edges.get((src, dst))

    def pairs(self) -> List[PairKey]:
        """Unordered pairs with at least one edge, each as a sorted tuple."""
        return sorted({tuple(sorted(k)) for k in self.edges})

    def pair_score(self, a: str, b: str) -> float:
        """max(covis a->b, covis b->a) over the edges present."""
        scores = [e.covis_score for e in (self.edge(a, b), self.edge(b, a)) if e is not None]
        return max(scores) if scores else 0.0

    def best_edge(self, a: str, b: str) -> EdgeObservation:
        """
        The direction with the higher covis score; ties prefer sorted order.
        """
        lo, hi = sorted((a, b))
        forward, backward = self.edge(lo, hi), self.edge(hi, lo)
        if forward is None:
            return backward
        if backward is None or forward.covis_score >= backward.covis_score:
            return forward
        return backward

    def ranked_pairs(self) -> List[PairKey]:
        """
        Unordered pairs by descending pair score, ties by lexicographic pair.
        """
        return rank_pairs({p: self.pair_score(*p) for p in self.pairs()})

    def to_dict(self) -> Dict:
        return {
            "nodes": list(self.nodes),
            "origin": self.origin,
            "edges": [self.edges[k].to_dict() for k in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PoseGraph":
        nodes = tuple(data["nodes"])
        if data["origin"] not in nodes:
            raise ValidationError(f"Graph origin {data['origin']} is not a node")
        edges = {}
        for raw in data["edges"]:
            edge = EdgeObservation.from_dict(raw)
            if (edge.src, edge.dst) in edges:
                raise ValidationError(f"Duplicate edge {edge.src}->{edge.dst}")
            edges[(edge.src, edge.dst)] = edge
        return cls(nodes=nodes, edges=edges, origin_index=nodes.index(data["origin"]))


# ============================================================================
# Construction
# ============================================================================

@dataclass(frozen=True)
class NoiseSpec:
    """
    Perturbation applied to synthesised observations.

    sigma_t is per translation axis (meters), sigma_theta in radians.
    outlier_factor > 0 scales the noise on both directions of the
    lowest-ranked pair.
    """
    sigma_t: float = 0.0
    sigma_theta: float = 0.0
    outlier_factor: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_t < 0 or self.sigma_theta < 0 or self.outlier_factor < 0:
            raise ValidationError(f"Noise parameters must be non-negative: {self}")

    @property
    def is_zero(self) -> bool:
        return self.sigma_t == 0.0 and self.sigma_theta == 0.0 and self.outlier_factor == 0.0


def perturb(pose: Pose2, noise: NoiseSpec, draw: np.ndarray, factor: float = 1.0) -> Pose2:
    """
    Apply a standard-normal draw (d_theta, d_x, d_y) scaled by the NoiseSpec sigmas.
    """
    return Pose2.from_angle(
        pose.theta + factor * noise.sigma_theta * draw[0],
        (pose.t[0] + factor * noise.sigma_t * draw[1], pose.t[1] + factor * noise.sigma_t * draw[2]),
    )


def build_graph(
    cluster: Cluster,
    scene: Scene,
    width: int = DEFAULT_WIDTH,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    cues: Optional[Mapping[PairKey, CueSet]] = None,
    keep_cues: bool = False,
) -> PoseGraph:
    """
    Complete digraph over the cluster with synthesised observations.

    Noise draws are taken per ordered pair in cluster order, so the same seed
    yields the same draws with or without an outlier.
    """
    ids = cluster.pano_ids
    if cues is None:
        cues = cluster_cues(scene, ids, width)
    poses = scene.poses(ids)
    ordered = list(itertools.permutations(ids, 2))
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((len(ordered), 3))

    scores = {key: edge_covis_score(cues[key]) for key in ordered}
    outlier_pair: Optional[PairKey] = None
    if noise is not None and noise.outlier_factor > 0:
        pair_scores = {
            tuple(sorted(k)): max(scores[k], scores[(k[1], k[0])]) for k in ordered
        }
        outlier_pair = rank_pairs(pair_scores)[-1]

    edges: Dict[PairKey, EdgeObservation] = {}
    for n, (i, j) in enumerate(ordered):
        rel = relative(poses[i], poses[j])
        if noise is not None and not noise.is_zero:
            factor = noise.outlier_factor if tuple(sorted((i, j))) == outlier_pair else 1.0
            rel = perturb(rel, noise, draws[n], factor)
        edges[(i, j)] = EdgeObservation(i, j, rel, scores[(i, j)], cues[(i, j)] if keep_cues else None)
    if outlier_pair is not None:
        logger.debug("Outlier injected on pair %s", outlier_pair)
    return PoseGraph(nodes=ids, edges=edges, origin_index=cluster.origin_index)


# ============================================================================
# Connectivity
# ============================================================================

class Connectivity(str, Enum):
    """Graph structure label used when breaking results down."""
    FULLY = "Fully"
    PARTIALLY = "Partially"
    ALL = "All"


@dataclass(frozen=True)
class ConnectivityClass:
    label: Connectivity
    threshold: float
    weak_pairs: Tuple[PairKey, ...] = ()


def _pair_scores(g: PoseGraph) -> Dict[PairKey, float]:
    return {
        tuple(sorted((a, b))): g.pair_score(a, b)
        for a, b in itertools.combinations(g.nodes, 2)
    }


def classify_connectivity(g: PoseGraph, threshold: float = DEFAULT_CONNECTIVITY_THRESHOLD) -> ConnectivityClass:
    """
    Fully connected iff every unordered pair scores >= threshold.
    """
    weak = tuple(sorted(p for p, s in _pair_scores(g).items() if s < threshold))
    label = Connectivity.PARTIALLY if weak else Connectivity.FULLY
    return ConnectivityClass(label=label, threshold=threshold, weak_pairs=weak)


def connectivity_percentage(g: PoseGraph, threshold: float = DEFAULT_CONNECTIVITY_THRESHOLD) -> float:
    """Fraction of unordered pairs whose score reaches the threshold."""
    scores = _pair_scores(g)
    if not scores:
        return 0.0
    return sum(1 for s in scores.values() if s >= threshold) / len(scores)
