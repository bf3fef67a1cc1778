"""
Message Passing Dataflow

One layer updates every directed edge, computes one message per directed
edge and replaces each node's features with the mean of its incoming
messages. All three phases read the pre-step states.

Update functions are pluggable (UpdateFunctions); see reference_functions
for deterministic implementations.

Edge (i, j) carries e_ij and feeds the message into node i from node j:
    m_{j->i} = message(x_i, x_j ⊕ e'_ij)
Its decoded dense rows describe the ordered pair i -> j.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from panograph_core.errors import DimensionError, ValidationError
from panograph_core.graph_models import PoseGraph
from panograph_core.pose_algebra import Pose2
from panograph_solvers.models import Solution, SolverDiagnostics, reanchor

from .losses import PosePrediction

logger = logging.getLogger(__name__)

DEFAULT_LAYERS = 6

PairKey = Tuple[str, str]


@dataclass(frozen=True)
class NodeState:
    features: np.ndarray
    is_origin: bool = False
    node_id: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.features, dtype=float)
        if arr.ndim != 1:
            raise DimensionError(f"Node {self.node_id} features must be a vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"Node {self.node_id} has non-finite features")
        object.__setattr__(self, "features", arr)

    @property
    def dim(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True)
class EdgeState:
    features: np.ndarray
    src: str = ""
    dst: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.features, dtype=float)
        if arr.ndim != 1:
            raise DimensionError(f"Edge {self.src}->{self.dst} features must be a vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"Edge {self.src}->{self.dst} has non-finite features")
        object.__setattr__(self, "features", arr)

    @property
    def dim(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True)
class DenseRows:
    """Decoded column-wise outputs for one ordered pair."""
    phi: np.ndarray
    alpha: np.ndarray
    covis: np.ndarray

    @property
    def mean_covis(self) -> float:
        return float(np.mean(self.covis))


@dataclass(frozen=True)
class UpdateFunctions:
    """
    edge_update:   EdgeState -> EdgeState
    message:       (target NodeState, source features ⊕ updated edge features) -> vector
    pose_decoder:  NodeState -> PosePrediction
    dense_decoder: EdgeState -> DenseRows
    """
    edge_update: Callable[[EdgeState], EdgeState]
    message: Callable[[NodeState, np.ndarray], np.ndarray]
    pose_decoder: Callable[[NodeState], PosePrediction]
    dense_decoder: Callable[[EdgeState], DenseRows]


def complete_adjacency(nodes: Sequence[str]) -> Tuple[PairKey, ...]:
    return tuple((i, j) for i in nodes for j in nodes if i != j)


@dataclass(frozen=True)
class MpGraph:
    """
    Node and edge states plus the directed adjacency driving aggregation.

    Adjacency entries may repeat; each occurrence contributes one message.
    """
    nodes: Dict[str, NodeState]
    edges: Dict[PairKey, EdgeState]
    adjacency: Tuple[PairKey, ...] = ()
    layers: int = DEFAULT_LAYERS

    def __post_init__(self) -> None:
        adjacency = tuple(tuple(p) for p in self.adjacency) or complete_adjacency(list(self.nodes))
        object.__setattr__(self, "adjacency", adjacency)
        if self.layers < 1:
            raise ValidationError(f"MpGraph needs at least one layer, got {self.layers}")
        dims = {s.dim for s in self.nodes.values()}
        if len(dims) > 1:
            raise DimensionError(f"Node feature dimensions differ: {sorted(dims)}")
        edge_dims = {s.dim for s in self.edges.values()}
        if len(edge_dims) > 1:
            raise DimensionError(f"Edge feature dimensions differ: {sorted(edge_dims)}")
        pair_set = set(adjacency)
        for i, j in pair_set:
            if i not in self.nodes or j not in self.nodes:
                raise ValidationError(f"Adjacency pair {(i, j)} references an unknown node")
            if (j, i) not in pair_set:
                raise ValidationError(f"Adjacency has {(i, j)} without {(j, i)}")
            if (i, j) not in self.edges:
                raise ValidationError(f"Adjacency pair {(i, j)} has no edge state")
        targets = {i for i, _ in pair_set}
        isolated = [n for n in self.nodes if n not in targets]
        if isolated:
            raise ValidationError(f"Nodes {isolated} receive no messages")

    @property
    def origin(self) -> Optional[str]:
        flagged = [n for n, s in self.nodes.items() if s.is_origin]
        return flagged[0] if flagged else None

    @classmethod
    def from_features(cls, features: Mapping[str, np.ndarray], origin: str,
                      layers: int = DEFAULT_LAYERS,
                      adjacency: Sequence[PairKey] = ()) -> "MpGraph":
        """
        Nodes from caller features; each edge starts as x_i ⊕ x_j.
        """
        if origin not in features:
            raise ValidationError(f"Origin {origin} has no features")
        nodes = {
            n: NodeState(np.asarray(f, dtype=float), is_origin=(n == origin), node_id=n)
            for n, f in features.items()
        }
        adjacency = tuple(adjacency) or complete_adjacency(list(nodes))
        edges = {
            (i, j): EdgeState(np.concatenate([nodes[i].features, nodes[j].features]), src=i, dst=j)
            for i, j in dict.fromkeys(adjacency)
        }
        return cls(nodes=nodes, edges=edges, adjacency=adjacency, layers=layers)


def _mean(vectors: List[np.ndarray]) -> np.ndarray:
    """Correctly rounded mean per coordinate; independent of input order."""
    stacked = np.stack(vectors)
    count = stacked.shape[0]
    return np.array([math.fsum(stacked[:, c]) / count for c in range(stacked.shape[1])])


def step(g: MpGraph, fns: UpdateFunctions, layer: int = 0) -> MpGraph:
    """
    One synchronous layer: edge update, messages, mean aggregation.
    """
    edges: Dict[PairKey, EdgeState] = {}
    for key, state in g.edges.items():
        updated = fns.edge_update(state)
        edges[key] = replace(updated, src=key[0], dst=key[1])
    edge_dims = {e.dim for e in edges.values()}
    if len(edge_dims) > 1:
        raise DimensionError(f"Layer {layer}: edge update produced dimensions {sorted(edge_dims)}")

    inbox: Dict[str, List[np.ndarray]] = {n: [] for n in g.nodes}
    for i, j in g.adjacency:
        joined = np.concatenate([g.nodes[j].features, edges[(i, j)].features])
        msg = np.asarray(fns.message(g.nodes[i], joined), dtype=float)
        if msg.ndim != 1:
            raise DimensionError(f"Layer {layer}: message {j}->{i} has shape {msg.shape}")
        inbox[i].append(msg)
    msg_dims = {m.shape[0] for box in inbox.values() for m in box}
    if len(msg_dims) > 1:
        raise DimensionError(f"Layer {layer}: messages have dimensions {sorted(msg_dims)}")

    nodes = {n: replace(state, features=_mean(inbox[n])) for n, state in g.nodes.items()}
    return MpGraph(nodes=nodes, edges=edges, adjacency=g.adjacency, layers=g.layers)


@dataclass(frozen=True)
class MpResult:
    graph: MpGraph
    poses: Dict[str, PosePrediction]
    dense: Dict[PairKey, DenseRows]


FunctionsArg = Union[UpdateFunctions, Sequence[UpdateFunctions]]


def run(g: MpGraph, fns: FunctionsArg, layers: Optional[int] = None) -> MpResult:
    """
    Apply `layers` steps (default g.layers), then decode every node and edge.

    `fns` is either shared by all layers or one UpdateFunctions per layer;
    decoders are taken from the last layer's functions.
    """
    count = g.layers if layers is None else layers
    if count < 1:
        raise ValidationError(f"run needs at least one layer, got {count}")
    per_layer = [fns] * count if isinstance(fns, UpdateFunctions) else list(fns)
    if len(per_layer) != count:
        raise ValidationError(f"Got {len(per_layer)} layer functions for {count} layers")
    for layer, layer_fns in enumerate(per_layer):
        g = step(g, layer_fns, layer)
    last = per_layer[-1]
    poses = {n: last.pose_decoder(state) for n, state in g.nodes.items()}
    dense = {key: last.dense_decoder(state) for key, state in g.edges.items()}
    return MpResult(graph=g, poses=poses, dense=dense)


# ============================================================================
# Inference with origin selection
# ============================================================================

OriginScorer = Callable[[MpResult, str], float]


def mean_outgoing_covis(result: MpResult, origin: str) -> float:
    """Mean predicted co-visibility over the origin's outgoing edges."""
    scores = [rows.mean_covis for (i, _), rows in sorted(result.dense.items()) if i == origin]
    return float(np.mean(scores)) if scores else 0.0


def select_origin(scores: Mapping[str, float], order: Sequence[str]) -> str:
    """Highest score; ties go to the earliest node in `order`."""
    best = order[0]
    for node in order[1:]:
        if scores[node] > scores[best]:
            best = node
    return best


def infer_with_origin_selection(
    features: Mapping[str, np.ndarray],
    fns: FunctionsArg,
    scorer: Optional[OriginScorer] = None,
    layers: int = DEFAULT_LAYERS,
) -> Solution:
    """
    Run the pipeline once per candidate origin and keep the run whose origin
    scores highest. Decoded poses are re-expressed in that origin's frame.
    """
    order = list(features)
    if len(order) < 2:
        raise ValidationError("Origin selection needs at least two nodes")
    scorer = scorer or mean_outgoing_covis
    results: Dict[str, MpResult] = {}
    scores: Dict[str, float] = {}
    for candidate in order:
        g = MpGraph.from_features(features, candidate, layers=layers)
        results[candidate] = run(g, fns)
        scores[candidate] = float(scorer(results[candidate], candidate))
    chosen = select_origin(scores, order)
    logger.debug("Origin scores %s -> %s", scores, chosen)

    decoded: Dict[str, Pose2] = {n: p.to_pose() for n, p in results[chosen].poses.items()}
    poses = reanchor(decoded, chosen)
    return Solution(
        poses=poses,
        origin=chosen,
        diagnostics=SolverDiagnostics(
            method="mp-demo",
            iterations=layers,
            termination=f"origin={chosen}",
            origin_scores=scores,
        ),
    )


def features_from_graph(g: PoseGraph, dim: int, seed: int) -> Dict[str, np.ndarray]:
    """Seeded per-node features for running the reference pipeline on a graph file."""
    rng = np.random.default_rng(seed)
    return {n: rng.normal(0.0, 1.0, size=dim) for n in g.nodes}
