"""
Solver Tests

Tests for the multi-view baselines:
- greedy spanning-tree selection and composition
- between-factor Jacobians against finite differences
- Levenberg-Marquardt behaviour, optimality and statistical ordering
"""

import sys
import os
import functools
import itertools
import math

import numpy as np
import pytest
from scipy.optimize import least_squares

# Add src to path for testing
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from panograph_core.errors import DisconnectedError, ValidationError
from panograph_core.graph_models import EdgeObservation, NoiseSpec, PoseGraph, build_graph
from panograph_core.models import Cluster
from panograph_core.pose_algebra import Pose2, relative, wrap_angle
from panograph_core.scene_synthesis import sample_clusters, synth_scene
from panograph_eval.alignment import evaluate
from panograph_solvers.greedy import UnionFind, greedy_spanning_tree, spanning_tree
from panograph_solvers.models import Solution, load_solution, reanchor, save_solution
from panograph_solvers.pgo import (
    PgoConfig,
    PoseGraphProblem,
    between_residual,
    jacobian_between,
    pgo,
    select_factor_edges,
)

GT = {
    "A": Pose2.identity(),
    "B": Pose2.from_angle(0.3, (2.0, 0.5)),
    "C": Pose2.from_angle(-0.8, (1.0, 2.5)),
    "D": Pose2.from_angle(2.0, (-1.5, 1.0)),
}


def gt_graph(scores, nodes=("A", "B", "C"), origin_index=0):
    """Both directions per pair, exact relative poses, symmetric scores."""
    edges = {}
    for (a, b), score in scores.items():
        edges[(a, b)] = EdgeObservation(a, b, relative(GT[a], GT[b]), score)
        edges[(b, a)] = EdgeObservation(b, a, relative(GT[b], GT[a]), score)
    return PoseGraph(nodes=nodes, edges=edges, origin_index=origin_index)


def assert_poses_close(actual, expected, tol):
    for node, pose in expected.items():
        assert np.allclose(actual[node].matrix(), pose.matrix(), atol=tol), node


@functools.lru_cache(maxsize=None)
def synthetic_graphs(count, noise=None, size=5, width=16):
    """(graph, ground-truth poses) for `count` seeded single-room clusters; cached across tests."""
    out = []
    for seed in range(count):
        scene = synth_scene(100 + seed, rooms=1, cameras_per_room=size)
        cluster = Cluster(scene.clusters[0])
        g = build_graph(cluster, scene, width=width, noise=noise, seed=seed)
        out.append((g, scene.poses(cluster.pano_ids)))
    return tuple(out)


# ============================================================================
# Greedy Spanning Tree Tests
# ============================================================================

class TestUnionFind:
    """Tests for the disjoint-set helper."""

    def test_union_and_find(self):
        """Union joins components once."""
        sets = UnionFind("abcd")
        assert sets.union("a", "b")
        assert sets.union("c", "d")
        assert not sets.union("b", "a")
        assert sets.union("a", "d")
        assert len({sets.find(x) for x in "abcd"}) == 1


class TestGreedy:
    """Tests for greedy_spanning_tree."""

    def test_drops_weakest_pair(self):
        """AB=0.9, BC=0.8, AC=0.2 keeps AB and BC."""
        g = gt_graph({("A", "B"): 0.9, ("B", "C"): 0.8, ("A", "C"): 0.2})
        sol = greedy_spanning_tree(g)
        assert [tuple(sorted(e)) for e in sol.diagnostics.accepted_edges] == [("A", "B"), ("B", "C")]
        assert sol.diagnostics.method == "greedy"

    def test_exact_composition(self):
        """Zero-noise observations compose to ground truth."""
        g = gt_graph({("A", "B"): 0.9, ("B", "C"): 0.8, ("A", "C"): 0.2, ("C", "D"): 0.5},
                     nodes=("A", "B", "C", "D"))
        sol = greedy_spanning_tree(g)
        assert_poses_close(sol.poses, GT, 1e-12)

    def test_origin_is_identity(self):
        """Output is expressed in the origin's frame."""
        g = gt_graph({("A", "B"): 0.9, ("B", "C"): 0.8}, origin_index=1)
        sol = greedy_spanning_tree(g)
        assert sol.origin == "B"
        assert sol.poses["B"] == Pose2.identity()
        assert_poses_close(sol.poses, reanchor(GT, "B"), 1e-12)

    def test_equal_scores_deterministic(self):
        """Ties are broken lexicographically and repeat across runs."""
        scores = {p: 0.5 for p in itertools.combinations("ABCD", 2)}
        g = gt_graph(scores, nodes=("A", "B", "C", "D"))
        first = greedy_spanning_tree(g).diagnostics.accepted_edges
        assert first == [("A", "B"), ("A", "C"), ("A", "D")]
        assert greedy_spanning_tree(g).diagnostics.accepted_edges == first

    def test_uses_stronger_direction(self):
        """The accepted edge is the direction with higher covis."""
        edges = {
            ("A", "B"): EdgeObservation("A", "B", relative(GT["A"], GT["B"]), 0.2),
            ("B", "A"): EdgeObservation("B", "A", relative(GT["B"], GT["A"]), 0.7),
        }
        g = PoseGraph(nodes=("A", "B"), edges=edges)
        assert greedy_spanning_tree(g).diagnostics.accepted_edges == [("B", "A")]

    def test_disconnected(self):
        """A node without edges cannot be placed."""
        g = gt_graph({("A", "B"): 0.9})
        with pytest.raises(DisconnectedError, match="C"):
            greedy_spanning_tree(g)
        with pytest.raises(DisconnectedError):
            spanning_tree(g)

    def test_zero_noise_synthetic_clusters(self):
        """Greedy recovers seeded synthetic clusters exactly."""
        scene = synth_scene(5, rooms=6, cameras_per_room=5)
        for k, cluster in enumerate(sample_clusters(scene, seed=5, sizes=(3, 4, 5))):
            g = build_graph(cluster, scene, width=16)
            errors = evaluate(greedy_spanning_tree(g), scene.poses(cluster.pano_ids))
            assert errors.translation.max() < 1e-6, k
            assert errors.rotation.max() < 1e-6, k


# ============================================================================
# Jacobian Tests
# ============================================================================

class TestJacobian:
    """Tests for jacobian_between."""

    def test_identity_blocks(self):
        """At coincident identity states J_i = -I and J_j = I."""
        j_i, j_j = jacobian_between(np.zeros(3), np.zeros(3))
        assert np.array_equal(j_i, -np.eye(3))
        assert np.array_equal(j_j, np.eye(3))

    def test_rotation_row_ignores_translation(self):
        """The angular residual does not depend on translations."""
        rng = np.random.default_rng(0)
        j_i, j_j = jacobian_between(rng.normal(size=3), rng.normal(size=3))
        assert np.all(j_i[0, 1:] == 0.0)
        assert np.all(j_j[0, 1:] == 0.0)

    def test_matches_finite_differences(self):
        """1000 random linearisation points agree with central differences."""
        rng = np.random.default_rng(1)
        h = 1e-6
        worst = 0.0
        for _ in range(1000):
            xi = np.array([rng.uniform(-1, 1), *rng.uniform(-3, 3, size=2)])
            xj = np.array([rng.uniform(-1, 1), *rng.uniform(-3, 3, size=2)])
            z = Pose2.from_angle(rng.uniform(-0.5, 0.5), rng.uniform(-2, 2, size=2))
            j_i, j_j = jacobian_between(xi, xj)
            for analytic, which in ((j_i, 0), (j_j, 1)):
                numeric = np.zeros((3, 3))
                for c in range(3):
                    step = np.zeros(3)
                    step[c] = h
                    if which == 0:
                        plus = between_residual(xi + step, xj, z)
                        minus = between_residual(xi - step, xj, z)
                    else:
                        plus = between_residual(xi, xj + step, z)
                        minus = between_residual(xi, xj - step, z)
                    numeric[:, c] = (plus - minus) / (2 * h)
                err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1e-12)
                worst = max(worst, err)
        assert worst < 1e-5

    def test_residual_zero_at_truth(self):
        """The exact observation leaves no residual."""
        a, b = GT["B"], GT["C"]
        xi = np.array([a.theta, *a.t])
        xj = np.array([b.theta, *b.t])
        assert np.allclose(between_residual(xi, xj, relative(a, b)), 0.0, atol=1e-12)


# ============================================================================
# PGO Tests
# ============================================================================

class TestPgoConfig:
    """Tests for PGO configuration validation."""

    def test_defaults(self):
        """Defaults follow the documented optimiser settings."""
        cfg = PgoConfig()
        assert cfg.max_iters == 1000
        assert cfg.rel_tol == 1e-5
        assert (cfg.prior.sigma_t, cfg.prior.sigma_theta) == (0.20, 0.1)
        assert (cfg.odometry.sigma_t, cfg.odometry.sigma_theta) == (0.30, 0.3)
        assert cfg.edges == "all"

    def test_invalid(self):
        """Bad settings are rejected."""
        with pytest.raises(ValidationError):
            PgoConfig(max_iters=0)
        with pytest.raises(ValidationError):
            PgoConfig(rel_tol=0.0)
        with pytest.raises(ValidationError):
            PgoConfig(edges="some")


class TestFactorSelection:
    """Tests for the PGO edge policies."""

    def test_tree_plus_one_on_triplet(self):
        """A triplet uses the tree plus the remaining pair under both policies."""
        g = gt_graph({("A", "B"): 0.9, ("B", "C"): 0.8, ("A", "C"): 0.2})
        for policy in ("tree+1", "all"):
            pairs = [tuple(sorted((e.src, e.dst))) for e in select_factor_edges(g, policy)]
            assert pairs == [("A", "B"), ("B", "C"), ("A", "C")]

    def test_tree_plus_one_takes_strongest_leftover(self):
        """On four nodes tree+1 adds the highest-ranked pair outside the tree."""
        scores = {("A", "B"): 0.9, ("B", "C"): 0.8, ("C", "D"): 0.7,
                  ("A", "C"): 0.6, ("B", "D"): 0.5, ("A", "D"): 0.4}
        g = gt_graph(scores, nodes=("A", "B", "C", "D"))
        pairs = [tuple(sorted((e.src, e.dst))) for e in select_factor_edges(g, "tree+1")]
        assert pairs == [("A", "B"), ("B", "C"), ("C", "D"), ("A", "C")]

    def test_all_skips_zero_covis(self):
        """Pairs without co-visibility are not added as factors."""
        scores = {p: 0.5 for p in itertools.combinations("ABCD", 2)}
        scores[("C", "D")] = 0.0
        g = gt_graph(scores, nodes=("A", "B", "C", "D"))
        assert len(select_factor_edges(g, "all")) == 5
        assert len(select_factor_edges(g, "tree+1")) == 4


class TestPgo:
    """Tests for Levenberg-Marquardt pose-graph optimisation."""

    def test_zero_noise_converges_immediately(self):
        """Greedy init is already optimal on exact observations."""
        for g, gt in synthetic_graphs(10):
            sol = pgo(g)
            assert sol.diagnostics.iterations <= 3
            assert sol.diagnostics.final_cost < 1e-18
            assert sol.diagnostics.converged
            assert_poses_close(sol.poses, greedy_spanning_tree(g).poses, 1e-9)
            errors = evaluate(sol, gt)
            assert errors.translation.max() < 1e-6
            assert errors.rotation.max() < 1e-6

    def test_zero_noise_recovers_hundred_clusters(self):
        """Both baselines are exact on 100 noise-free clusters of 3, 4 and 5 panoramas."""
        for k in range(100):
            size = 3 + k % 3
            scene = synth_scene(500 + k, rooms=1, cameras_per_room=size)
            cluster = Cluster(scene.clusters[0])
            g = build_graph(cluster, scene, width=16, seed=k)
            gt = scene.poses(cluster.pano_ids)
            for solve in (greedy_spanning_tree, pgo):
                errors = evaluate(solve(g), gt)
                assert errors.translation.max() < 1e-6, (k, solve.__name__)
                assert errors.rotation.max() < 1e-6, (k, solve.__name__)

    def test_single_factor_matches_observation(self):
        """With one between-factor the optimum is the observation itself."""
        z = Pose2.from_angle(0.4, (1.5, -0.5))
        g = PoseGraph(nodes=("A", "B"), edges={("A", "B"): EdgeObservation("A", "B", z, 0.8)})
        start = Solution({"A": Pose2.identity(), "B": Pose2.from_angle(0.0, (1.0, 0.0))}, "A")
        sol = pgo(g, init=start)
        assert sol.poses["A"] == Pose2.identity()
        assert np.allclose(sol.poses["B"].matrix(), z.matrix(), atol=1e-9)
        assert sol.diagnostics.iterations >= 1

    def test_accepted_costs_strictly_decrease(self):
        """The cost trace over accepted steps is strictly decreasing."""
        for g, _ in synthetic_graphs(5, NoiseSpec(0.1, 0.05)):
            trace = pgo(g).diagnostics.cost_trace
            assert len(trace) >= 2
            assert all(b < a for a, b in zip(trace, trace[1:]))

    def test_origin_stays_identity(self):
        """Output is re-anchored at the origin."""
        g, _ = synthetic_graphs(1, NoiseSpec(0.1, 0.05))[0]
        sol = pgo(g)
        assert sol.poses[g.origin] == Pose2.identity()

    def test_missing_init_node(self):
        """The initial solution must cover every node."""
        g = gt_graph({("A", "B"): 0.9, ("B", "C"): 0.8})
        with pytest.raises(ValidationError):
            pgo(g, init=Solution({"A": Pose2.identity()}, "A"))

    def test_disconnected(self):
        """PGO refuses graphs it cannot initialise."""
        with pytest.raises(DisconnectedError):
            pgo(gt_graph({("A", "B"): 0.9}))

    def test_inconsistent_cycle_matches_oracle(self):
        """A 3-node loop with conflicting observations reaches the least-squares optimum."""
        edges = {
            ("A", "B"): EdgeObservation("A", "B", Pose2.from_angle(0.1, (1.0, 0.0)), 0.9),
            ("B", "C"): EdgeObservation("B", "C", Pose2.from_angle(0.2, (1.0, 0.1)), 0.8),
            ("A", "C"): EdgeObservation("A", "C", Pose2.from_angle(0.5, (1.8, 0.5)), 0.4),
        }
        g = PoseGraph(nodes=("A", "B", "C"), edges=edges)
        cfg = PgoConfig(rel_tol=1e-12)
        sol = pgo(g, cfg=cfg)

        def residuals(x):
            states = {"A": x[0:3], "B": x[3:6], "C": x[6:9]}
            out = [np.array([x[0] / 0.1, x[1] / 0.2, x[2] / 0.2])]
            for (i, j), e in edges.items():
                xi, xj = states[i], states[j]
                c, s = math.cos(xi[0]), math.sin(xi[0])
                d = xj[1:] - xi[1:]
                out.append(np.array([
                    wrap_angle(xj[0] - xi[0] - e.rel_pose.theta) / 0.3,
                    (c * d[0] + s * d[1] - e.rel_pose.t[0]) / 0.3,
                    (-s * d[0] + c * d[1] - e.rel_pose.t[1]) / 0.3,
                ]))
            return np.concatenate(out)

        problem = PoseGraphProblem(g, select_factor_edges(g, "all"), cfg)
        x_ours = problem.pack(sol.poses)
        oracle = least_squares(residuals, x_ours + 0.05, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        ours = problem.cost(x_ours)
        assert ours == pytest.approx(oracle.cost, rel=1e-6, abs=1e-12)
        assert ours > 1e-4

        # no point of a local grid around the solution does better
        for offset in itertools.product((-1e-3, 0.0, 1e-3), repeat=6):
            x = x_ours.copy()
            x[3:] += offset
            assert problem.cost(x) >= ours - 1e-12

    def test_noise_lowers_error_on_average(self):
        """With Gaussian noise and no outlier, PGO beats the greedy tree on mean ATE."""
        graphs = synthetic_graphs(500, NoiseSpec(0.1, 0.05))
        greedy_ate = np.mean([evaluate(greedy_spanning_tree(g), gt).translation.mean() for g, gt in graphs])
        pgo_ate = np.mean([evaluate(pgo(g), gt).translation.mean() for g, gt in graphs])
        assert pgo_ate <= greedy_ate

    def test_outlier_hurts_pgo_more(self):
        """An outlier on the weakest pair degrades PGO more than greedy."""
        clean = synthetic_graphs(500, NoiseSpec(0.1, 0.05))
        dirty = synthetic_graphs(500, NoiseSpec(0.1, 0.05, outlier_factor=10.0))

        def mean_ate(solver, graphs):
            return float(np.mean([evaluate(solver(g), gt).translation.mean() for g, gt in graphs]))

        greedy_delta = mean_ate(greedy_spanning_tree, dirty) - mean_ate(greedy_spanning_tree, clean)
        pgo_delta = mean_ate(pgo, dirty) - mean_ate(pgo, clean)
        assert pgo_delta > greedy_delta


# ============================================================================
# Solution File Tests
# ============================================================================

class TestSolutionFiles:
    """Tests for `.poses.json`."""

    def test_round_trip(self, tmp_path):
        """Saved solutions load back with diagnostics."""
        g = gt_graph({("A", "B"): 0.9, ("B", "C"): 0.8, ("A", "C"): 0.2})
        sol = pgo(g)
        back = load_solution(save_solution(sol, tmp_path / "x.poses.json"))
        assert back.origin == "A"
        assert back.diagnostics.method == "pgo"
        assert_poses_close(back.poses, sol.poses, 1e-12)

    def test_origin_must_be_identity(self):
        """A solution whose origin is moved is invalid."""
        with pytest.raises(ValidationError):
            Solution({"A": Pose2.from_angle(0.1), "B": Pose2.identity()}, "A")
