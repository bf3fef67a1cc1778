"""
Greedy Spanning Tree Baseline

Pairs are visited from highest to lowest co-visibility; a pair is accepted
when it joins two components (union-find). Poses are then composed outward
from the origin along the accepted tree.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Dict, List

from panograph_core.errors import DisconnectedError
from panograph_core.graph_models import EdgeObservation, PoseGraph
from panograph_core.pose_algebra import Pose2, compose, inverse

from .models import Solution, SolverDiagnostics

logger = logging.getLogger(__name__)


class UnionFind:
    """Disjoint sets over string ids with path halving and union by size."""

    def __init__(self, items) -> None:
        self._parent = {x: x for x in items}
        self._size = {x: 1 for x in items}

    def find(self, x: str) -> str:
        while self._parent[x] != x:
            self._parent[x] = self._parent[self._parent[x]]
            x = self._parent[x]
        return x

    def union(self, a: str, b: str) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]
        return True


def spanning_tree(g: PoseGraph) -> List[EdgeObservation]:
    """
    Accepted tree edges in acceptance order, each in its higher-covis direction.

    Raises DisconnectedError when the edges cannot span every node.
    """
    sets = UnionFind(g.nodes)
    accepted: List[EdgeObservation] = []
    for a, b in g.ranked_pairs():
        if sets.union(a, b):
            accepted.append(g.best_edge(a, b))
            if len(accepted) == g.size - 1:
                break
    if len(accepted) < g.size - 1:
        origin_root = sets.find(g.origin)
        unreachable = [n for n in g.nodes if sets.find(n) != origin_root]
        raise DisconnectedError(f"Nodes {unreachable} cannot be reached from origin {g.origin}")
    return accepted


def compose_tree(g: PoseGraph, tree: List[EdgeObservation]) -> Dict[str, Pose2]:
    """
    Breadth-first composition from the origin; neighbours are visited in node order.
    """
    order = {n: k for k, n in enumerate(g.nodes)}
    adjacency: Dict[str, List[tuple]] = {n: [] for n in g.nodes}
    for edge in tree:
        adjacency[edge.src].append((edge.dst, edge.rel_pose))
        adjacency[edge.dst].append((edge.src, inverse(edge.rel_pose)))
    poses: Dict[str, Pose2] = {g.origin: Pose2.identity()}
    queue = deque([g.origin])
    while queue:
        node = queue.popleft()
        for nbr, rel in sorted(adjacency[node], key=lambda item: order[item[0]]):
            if nbr not in poses:
                poses[nbr] = compose(poses[node], rel)
                queue.append(nbr)
    return {n: poses[n] for n in g.nodes}


def greedy_spanning_tree(g: PoseGraph) -> Solution:
    """
    Place every panorama by composing relative poses along the greedy tree.
    """
    tree = spanning_tree(g)
    poses = compose_tree(g, tree)
    accepted = [(e.src, e.dst) for e in tree]
    logger.debug("Greedy tree over %d nodes: %s", g.size, accepted)
    return Solution(
        poses=poses,
        origin=g.origin,
        diagnostics=SolverDiagnostics(method="greedy", accepted_edges=accepted, termination="tree"),
    )
