"""
PanoGraph Command Line

Subcommands:
    synth       generate a synthetic scene file
    cues        write ground-truth cue files for one cluster
    graph       build a (noisy) pose graph file for one cluster
    solve       solve a graph file with greedy, pgo or the reference message passing
    eval        evaluate pose files against a scene and write a metrics CSV
    bench       synth -> graphs over a noise sweep -> both baselines -> CSV (+ SVG)
    loss-check  finite-difference report for every differentiable loss
    mp-demo     run the reference message-passing pipeline on a graph file

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from panograph_core.config import configure_logging, load_config
from panograph_core.cues import cluster_cues, edge_covis_score
from panograph_core.errors import PanoGraphError, ParseError, ValidationError
from panograph_core.graph_models import build_graph
from panograph_core.models import Scene
from panograph_core.scene_synthesis import ROOM_SHAPES, cluster_from_ids, sample_clusters, synth_scene
from panograph_core.storage import (
    load_graph,
    load_scene,
    save_cues,
    save_cues_binary,
    save_graph,
    save_scene,
)
from panograph_eval.alignment import evaluate
from panograph_eval.metrics import summarize
from panograph_exports.metrics_csv import render_metrics_csv, write_metrics_csv
from panograph_exports.topdown_svg import write_topdown_svg
from panograph_net.gradcheck import run_loss_check
from panograph_net.message_passing import DEFAULT_LAYERS, features_from_graph, infer_with_origin_selection
from panograph_net.reference_functions import cue_oracle_functions, linear_functions
from panograph_solvers.greedy import greedy_spanning_tree
from panograph_solvers.models import Solution, load_solution, save_solution
from panograph_solvers.pgo import EDGE_POLICIES, PgoConfig, pgo

from .run_config import SOLVER_METHODS, RunConfig, noise_levels_from
from .services.pipeline_service import solve_clusters, summarize_outcomes

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
DEFAULT_FEATURE_DIM = 8


# ============================================================================
# Helpers
# ============================================================================

def _cluster_ids(scene: Scene, args: argparse.Namespace) -> List[str]:
    if getattr(args, "panos", None):
        ids = [p.strip() for p in args.panos.split(",") if p.strip()]
        for pid in ids:
            scene.camera(pid)
        return ids
    index = args.cluster
    if not 0 <= index < len(scene.clusters):
        raise ValidationError(f"Scene has {len(scene.clusters)} clusters; no cluster #{index}")
    return list(scene.clusters[index])


def _pgo_config(args: argparse.Namespace) -> PgoConfig:
    return PgoConfig(edges=args.pgo_edges)


def _mp_solution(graph_nodes: Sequence[str], features, args: argparse.Namespace, width: int,
                 scene: Optional[Scene] = None) -> Solution:
    if scene is not None:
        fns = cue_oracle_functions(scene, list(graph_nodes), args.dim, args.seed, width)
    else:
        fns = linear_functions(args.dim, args.seed, width)
    return infer_with_origin_selection(features, fns, layers=args.layers)


def _print_poses(solution: Solution) -> None:
    print(f"origin: {solution.origin}")
    for pid, pose in solution.poses.items():
        print(f"{pid}\ttheta={pose.theta:+.6f}\tx={pose.t[0]:+.6f}\ty={pose.t[1]:+.6f}")


# ============================================================================
# Commands
# ============================================================================

def cmd_synth(args: argparse.Namespace) -> int:
    scene = synth_scene(
        seed=args.seed,
        rooms=args.rooms,
        cameras_per_room=args.panos_per_room,
        size_range=(args.size_min, args.size_max),
        shape=args.shape,
        margin=args.margin,
    )
    save_scene(scene, args.output)
    print(f"{args.output}: {len(scene.rooms)} rooms, {len(scene.panos)} panos, {len(scene.clusters)} clusters")
    return EXIT_OK


def cmd_cues(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    ids = _cluster_ids(scene, args)
    out_dir = Path(args.output)
    for (src, dst), cue in cluster_cues(scene, ids, args.width).items():
        stem = f"{src}__{dst}"
        if args.binary:
            save_cues_binary(cue, out_dir / f"{stem}.cues.bin")
        else:
            save_cues(cue, out_dir / f"{stem}.cues.json")
        print(f"{src}\t{dst}\tcovis={edge_covis_score(cue):.6f}")
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    ids = _cluster_ids(scene, args)
    cluster = cluster_from_ids(ids, origin=args.origin or "", seed=args.seed)
    noise = noise_levels_from((args.noise_t,), (args.noise_theta,), args.outlier_factor)[0]
    graph = build_graph(cluster, scene, width=args.width, noise=noise, seed=args.seed)
    save_graph(graph, args.output)
    print(f"{args.output}: {graph.size} nodes, {len(graph.edges)} edges, origin {graph.origin}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    if args.method == "greedy":
        solution = greedy_spanning_tree(graph)
    elif args.method == "pgo":
        solution = pgo(graph, None, _pgo_config(args))
    else:
        if args.seed is None:
            raise ValidationError("solve --method mp-demo needs --seed")
        features = features_from_graph(graph, args.dim, args.seed)
        solution = _mp_solution(graph.nodes, features, args, args.width)
    save_solution(solution, args.output)
    _print_poses(solution)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    by_size: Dict[int, list] = {}
    for path in args.poses:
        solution = load_solution(path)
        errors = evaluate(solution, scene.poses(solution.nodes))
        by_size.setdefault(errors.size, []).append(errors)
    rows = [
        summarize(by_size[size], group_size=size, method=args.method, per_cluster=args.per_cluster)
        for size in sorted(by_size)
    ]
    if args.output:
        write_metrics_csv(rows, args.output)
    else:
        sys.stdout.write(render_metrics_csv(rows))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = RunConfig(
        seed=args.seed,
        width=args.width,
        sizes=tuple(args.sizes),
        noise_levels=noise_levels_from(tuple(args.noise_t), tuple(args.noise_theta), args.outlier_factor),
        threshold=args.threshold,
        pgo_edges=args.pgo_edges,
        output=args.output,
        svg=args.svg,
        per_cluster=args.per_cluster,
        by_connectivity=args.by_connectivity,
        threads=load_config().THREADS,
    )
    seed = config.require_seed("bench")
    scene = synth_scene(
        seed=seed,
        rooms=args.rooms,
        cameras_per_room=args.panos_per_room,
        shape=args.shape,
    )
    clusters = sample_clusters(scene, seed, sizes=config.sizes, samples_per_space=args.samples_per_space)
    if not clusters:
        raise ValidationError(f"No space holds a cluster of sizes {config.sizes}")
    logger.info("bench: %d clusters x %d noise levels", len(clusters), len(config.noise_levels))
    outcomes = solve_clusters(
        scene,
        clusters,
        config.noise_levels,
        seed,
        config.width,
        PgoConfig(edges=config.pgo_edges),
        config.threshold,
        config.threads,
    )
    rows = summarize_outcomes(
        outcomes,
        levels=len(config.noise_levels),
        by_connectivity=config.by_connectivity,
        per_cluster=config.per_cluster,
    )
    if config.output:
        write_metrics_csv(rows, config.output)
    else:
        sys.stdout.write(render_metrics_csv(rows))
    if config.svg:
        first = outcomes[0]
        write_topdown_svg(scene, first.cluster.pano_ids, first.solutions, config.svg, config.width,
                          title=f"{len(first.cluster.pano_ids)} panoramas")
    return EXIT_OK


def cmd_loss_check(args: argparse.Namespace) -> int:
    rows = run_loss_check(args.seed, instances=args.instances, tolerance=args.tolerance)
    print("loss\tinstances\tmax_rel_err\tstatus")
    for row in rows:
        print(f"{row.loss}\t{row.instances}\t{row.max_rel_error:.3e}\t{'ok' if row.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in rows) else EXIT_RUNTIME


def cmd_mp_demo(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    scene = load_scene(args.scene) if args.scene else None
    features = features_from_graph(graph, args.dim, args.seed)
    solution = _mp_solution(graph.nodes, features, args, args.width, scene)
    for node, score in solution.diagnostics.origin_scores.items():
        print(f"score[{node}]={score:.6f}")
    _print_poses(solution)
    if args.output:
        save_solution(solution, args.output)
    return EXIT_OK


# ============================================================================
# Parser
# ============================================================================

def build_parser(default_width: int = 512) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panograph", description="Multi-view panorama pose toolkit")
    parser.add_argument("--log-level", default=None, help="Override PANOGRAPH_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_width(p: argparse.ArgumentParser) -> None:
        p.add_argument("--width", type=int, default=default_width, help="Equirectangular column count")

    def add_cluster(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scene", required=True)
        p.add_argument("--cluster", type=int, default=0, help="Index into the scene's clusters")
        p.add_argument("--panos", default="", help="Comma-separated pano ids (overrides --cluster)")

    def add_mp(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dim", type=int, default=DEFAULT_FEATURE_DIM, help="Node feature dimension")
        p.add_argument("--layers", type=int, default=DEFAULT_LAYERS)

    p = sub.add_parser("synth", help="Generate a synthetic scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rooms", type=int, default=1)
    p.add_argument("--panos-per-room", type=int, default=3)
    p.add_argument("--size-min", type=float, default=3.0)
    p.add_argument("--size-max", type=float, default=8.0)
    p.add_argument("--shape", choices=ROOM_SHAPES, default="convex")
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("cues", help="Write ground-truth cues for a cluster")
    add_cluster(p)
    add_width(p)
    p.add_argument("--binary", action="store_true", help="Write flat binary .cues.bin files")
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(handler=cmd_cues)

    p = sub.add_parser("graph", help="Build a pose graph file for a cluster")
    add_cluster(p)
    add_width(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--origin", default="", help="Origin pano id (default: first)")
    p.add_argument("--noise-t", type=float, default=0.0)
    p.add_argument("--noise-theta", type=float, default=0.0)
    p.add_argument("--outlier-factor", type=float, default=0.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(handler=cmd_graph)

    p = sub.add_parser("solve", help="Solve a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--method", choices=SOLVER_METHODS, default="greedy")
    p.add_argument("--pgo-edges", choices=EDGE_POLICIES, default="all")
    p.add_argument("--seed", type=int, default=None, help="Required for mp-demo")
    add_width(p)
    add_mp(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("eval", help="Evaluate pose files against a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--poses", nargs="+", required=True)
    p.add_argument("--method", default="unknown")
    p.add_argument("--per-cluster", action="store_true", help="Pool per-cluster means instead of per-pano errors")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("bench", help="End-to-end benchmark of both baselines")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rooms", type=int, default=20)
    p.add_argument("--panos-per-room", type=int, default=5)
    p.add_argument("--shape", choices=ROOM_SHAPES, default="convex")
    p.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--samples-per-space", type=int, default=2)
    p.add_argument("--noise-t", type=float, nargs="+", default=[0.1])
    p.add_argument("--noise-theta", type=float, nargs="+", default=[0.05])
    p.add_argument("--outlier-factor", type=float, default=0.0)
    p.add_argument("--pgo-edges", choices=EDGE_POLICIES, default="all")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--by-connectivity", action="store_true")
    p.add_argument("--per-cluster", action="store_true")
    p.add_argument("--svg", default=None, help="Top-down render of the first cluster")
    add_width(p)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("loss-check", help="Finite-difference check of loss gradients")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(handler=cmd_loss_check)

    p = sub.add_parser("mp-demo", help="Reference message passing on a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scene", default=None, help="Decode ground-truth cues from this scene")
    add_width(p)
    add_mp(p)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(handler=cmd_mp_demo)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    config = load_config()
    parser = build_parser(config.WIDTH)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level or config.LOG_LEVEL)
    handler: Callable[[argparse.Namespace], int] = args.handler
    logger.info("Running %s", args.command)
    try:
        code = handler(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PanoGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    logger.info("Finished %s with exit code %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
