"""
Pipeline Service

Central service layer for batch work over clusters:
- graph construction with noise and connectivity labelling
- running the solvers and evaluating them against ground truth
- pooling errors into summary rows for the metrics CSV

Per-cluster work runs on a thread pool capped by PANOGRAPH_THREADS; results
are gathered in submission order, so output never depends on scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

from panograph_core.graph_models import (
    Connectivity,
    ConnectivityClass,
    NoiseSpec,
    PoseGraph,
    build_graph,
    classify_connectivity,
)
from panograph_core.models import Cluster, Scene
from panograph_eval.alignment import AlignedErrors, evaluate
from panograph_eval.metrics import MetricSummary, summarize
from panograph_solvers.greedy import greedy_spanning_tree
from panograph_solvers.models import Solution
from panograph_solvers.pgo import PgoConfig, pgo

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

BASELINES = ("greedy", "pgo")


def run_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Map `fn` over `items` on up to `threads` workers, returning results in input order.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def method_label(method: str, noise: NoiseSpec, levels: int) -> str:
    """Method name, suffixed with its noise level when several levels are swept."""
    if levels <= 1:
        return method
    return f"{method}@t{noise.sigma_t:g}_r{noise.sigma_theta:g}"


@dataclass
class ClusterOutcome:
    cluster: Cluster
    noise: NoiseSpec
    graph: PoseGraph
    connectivity: ConnectivityClass
    solutions: Dict[str, Solution] = field(default_factory=dict)
    errors: Dict[str, AlignedErrors] = field(default_factory=dict)


def solve_cluster(
    scene: Scene,
    cluster: Cluster,
    noise: NoiseSpec,
    seed: int,
    width: int,
    pgo_cfg: Optional[PgoConfig] = None,
    threshold: float = 0.1,
    methods: Sequence[str] = BASELINES,
) -> ClusterOutcome:
    """
    Build the noisy graph for one cluster, solve it with each baseline and evaluate.
    """
    graph = build_graph(cluster, scene, width=width, noise=noise, seed=seed)
    outcome = ClusterOutcome(
        cluster=cluster,
        noise=noise,
        graph=graph,
        connectivity=classify_connectivity(graph, threshold),
    )
    gt = scene.poses(cluster.pano_ids)
    greedy = greedy_spanning_tree(graph)
    if "greedy" in methods:
        outcome.solutions["greedy"] = greedy
    if "pgo" in methods:
        outcome.solutions["pgo"] = pgo(graph, greedy, pgo_cfg)
    for method, solution in outcome.solutions.items():
        outcome.errors[method] = evaluate(solution, gt)
    return outcome


def solve_clusters(
    scene: Scene,
    clusters: Sequence[Cluster],
    noise_levels: Sequence[NoiseSpec],
    seed: int,
    width: int,
    pgo_cfg: Optional[PgoConfig] = None,
    threshold: float = 0.1,
    threads: int = 1,
) -> List[ClusterOutcome]:
    """
    Every (noise level, cluster) job; job k draws its noise from seed + k.
    """
    jobs: List[Tuple[int, NoiseSpec, Cluster]] = [
        (k, noise, cluster)
        for k, (noise, cluster) in enumerate((n, c) for n in noise_levels for c in clusters)
    ]

    def work(job: Tuple[int, NoiseSpec, Cluster]) -> ClusterOutcome:
        k, noise, cluster = job
        return solve_cluster(scene, cluster, noise, seed + k, width, pgo_cfg, threshold)

    outcomes = run_ordered(work, jobs, threads)
    logger.info("Solved %d cluster jobs", len(outcomes))
    return outcomes


def summarize_outcomes(
    outcomes: Iterable[ClusterOutcome],
    levels: int = 1,
    by_connectivity: bool = False,
    per_cluster: bool = False,
) -> List[MetricSummary]:
    """
    One "All" row per (size, method) plus, optionally, Fully/Partially rows.
    """
    pooled: Dict[Tuple[int, str, str], List[AlignedErrors]] = {}
    for outcome in outcomes:
        size = outcome.cluster.size
        for method, errors in outcome.errors.items():
            label = method_label(method, outcome.noise, levels)
            pooled.setdefault((size, label, Connectivity.ALL.value), []).append(errors)
            if by_connectivity:
                pooled.setdefault((size, label, outcome.connectivity.label.value), []).append(errors)

    conn_order = {Connectivity.ALL.value: 0, Connectivity.FULLY.value: 1, Connectivity.PARTIALLY.value: 2}
    method_order: Dict[str, int] = {}
    for _, label, _ in pooled:
        method_order.setdefault(label, len(method_order))
    keys = sorted(pooled, key=lambda k: (k[0], conn_order[k[2]], method_order[k[1]]))
    return [
        summarize(pooled[k], group_size=k[0], method=k[1], connectivity=k[2], per_cluster=per_cluster)
        for k in keys
    ]
