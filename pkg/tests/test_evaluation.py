"""
Evaluation Tests

Tests for scoring predictions against ground truth:
- rigid 2D alignment and its degenerate inputs
- per-panorama ATE / ARE and gauge invariance
- summary statistics, the metrics CSV and the top-down render
- batch pipeline ordering
"""

import sys
import os
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from panograph_core.errors import DegenerateError, ValidationError
from panograph_core.graph_models import NoiseSpec
from panograph_core.pose_algebra import Pose2, apply_points, compose
from panograph_core.scene_synthesis import sample_clusters, synth_scene
from panograph_core.storage import load_scene
from panograph_eval import AlignedErrors, align_2d, evaluate, summarize
from panograph_exports.metrics_csv import HEADER, render_metrics_csv, write_metrics_csv
from panograph_exports.topdown_svg import render_topdown_svg
from panograph_app.services.pipeline_service import (
    method_label,
    run_ordered,
    solve_cluster,
    solve_clusters,
    summarize_outcomes,
)
from panograph_solvers.greedy import greedy_spanning_tree
from panograph_solvers.models import Solution, reanchor

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
IDS = ("pano_a", "pano_b", "pano_c")


def golden_scene():
    return load_scene(os.path.join(DATA_DIR, "unit_square.scene.json"))


def errors_from(rot_deg, tr):
    return AlignedErrors(
        nodes=[f"n{k}" for k in range(len(tr))],
        translation=np.array(tr, dtype=float),
        rotation=np.radians(np.array(rot_deg, dtype=float)),
        transform=Pose2.identity(),
    )


# ============================================================================
# Alignment Tests
# ============================================================================

class TestAlign2D:
    """Tests for the least-squares rigid fit."""

    def test_recovers_transform(self):
        """Exact correspondences give back the generating transform."""
        rng = np.random.default_rng(0)
        pts = rng.uniform(-3.0, 3.0, size=(6, 2))
        truth = Pose2.from_angle(2.4, (1.5, -0.7))
        fit = align_2d(pts, apply_points(truth, pts))
        assert abs(fit.theta - truth.theta) < 1e-9
        assert np.allclose(fit.t, truth.t, atol=1e-9)

    def test_angle_near_pi(self):
        """Rotations close to pi are recovered without wrapping trouble."""
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        truth = Pose2.from_angle(math.pi - 1e-4, (0.0, 0.0))
        fit = align_2d(pts, apply_points(truth, pts))
        assert np.allclose(fit.matrix(), truth.matrix(), atol=1e-9)

    def test_two_points(self):
        """Two points are enough."""
        pts = np.array([[0.0, 0.0], [2.0, 0.0]])
        truth = Pose2.from_angle(-1.0, (3.0, 4.0))
        fit = align_2d(pts, apply_points(truth, pts))
        assert np.allclose(fit.matrix(), truth.matrix(), atol=1e-9)

    def test_single_point_is_degenerate(self):
        with pytest.raises(DegenerateError):
            align_2d([[0.0, 0.0]], [[1.0, 1.0]])

    def test_coincident_ground_truth_is_degenerate(self):
        """Ground-truth points on top of each other leave the rotation unidentified."""
        with pytest.raises(DegenerateError):
            align_2d([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])

    def test_collapsed_prediction_aligns_centroids(self):
        """A prediction collapsed to one point gets zero rotation and matched centroids."""
        gt = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]])
        fit = align_2d([[1.0, 1.0]] * 3, gt)
        assert fit.theta == 0.0
        assert np.allclose(fit.t, gt.mean(axis=0) - np.array([1.0, 1.0]), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            align_2d([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


# ============================================================================
# Per-Panorama Error Tests
# ============================================================================

class TestEvaluate:
    """Tests for ATE / ARE."""

    def test_exact_prediction_scores_zero(self):
        """A prediction in any origin's frame scores zero."""
        gt = golden_scene().poses(IDS)
        for origin in IDS:
            result = evaluate(Solution(poses=reanchor(gt, origin), origin=origin), gt)
            assert result.nodes == list(IDS)
            assert np.all(result.translation < 1e-9)
            assert np.all(result.rotation < 1e-9)

    def test_gauge_invariance(self):
        """Errors do not depend on which node anchors the prediction."""
        gt = golden_scene().poses(IDS)
        rng = np.random.default_rng(5)
        noisy = {
            pid: compose(pose, Pose2.from_angle(rng.normal(0, 0.1), rng.normal(0, 0.2, size=2)))
            for pid, pose in gt.items()
        }
        baseline = evaluate(Solution(poses=reanchor(noisy, "pano_a"), origin="pano_a"), gt)
        for origin in ("pano_b", "pano_c"):
            other = evaluate(Solution(poses=reanchor(noisy, origin), origin=origin), gt)
            assert np.allclose(other.translation, baseline.translation, atol=1e-9)
            assert np.allclose(other.rotation, baseline.rotation, atol=1e-9)

    def test_invariant_under_random_rigid_transforms(self):
        """Moving the ground truth by any rigid transform leaves ATE/ARE unchanged."""
        scene = synth_scene(seed=11, rooms=1, cameras_per_room=5)
        ids = scene.clusters[0]
        gt = scene.poses(ids)
        rng = np.random.default_rng(21)
        noisy = {
            pid: compose(pose, Pose2.from_angle(rng.normal(0, 0.1), rng.normal(0, 0.2, size=2)))
            for pid, pose in gt.items()
        }
        pred = Solution(poses=reanchor(noisy, ids[0]), origin=ids[0])
        baseline = evaluate(pred, gt)
        for _ in range(1000):
            g = Pose2.from_angle(rng.uniform(-math.pi, math.pi), rng.uniform(-50.0, 50.0, size=2))
            moved = evaluate(pred, {pid: compose(g, pose) for pid, pose in gt.items()})
            assert np.allclose(moved.translation, baseline.translation, atol=1e-9)
            assert np.allclose(moved.rotation, baseline.rotation, atol=1e-9)

    def test_two_node_split_error(self):
        """With two nodes the distance mismatch is split evenly."""
        gt = {"A": Pose2.identity(), "B": Pose2.from_angle(0.0, (2.0, 0.0))}
        pred = Solution(poses={"A": Pose2.identity(), "B": Pose2.from_angle(0.0, (3.0, 0.0))}, origin="A")
        result = evaluate(pred, gt)
        assert np.allclose(result.translation, [0.5, 0.5], atol=1e-12)
        assert np.allclose(result.rotation, [0.0, 0.0], atol=1e-12)

    def test_rotation_error_is_wrapped(self):
        """ARE lies in [0, pi]."""
        gt = {"A": Pose2.identity(), "B": Pose2.from_angle(3.0, (1.0, 0.0)), "C": Pose2.from_angle(0.0, (0.0, 1.0))}
        pred = Solution(
            poses={"A": Pose2.identity(), "B": Pose2.from_angle(-3.0, (1.0, 0.0)), "C": Pose2.from_angle(0.0, (0.0, 1.0))},
            origin="A",
        )
        result = evaluate(pred, gt)
        assert np.all(result.rotation <= math.pi)
        assert result.rotation[1] == pytest.approx(2 * math.pi - 6.0, abs=1e-9)

    def test_collapsed_prediction_reports_errors(self):
        """Every pose at identity still yields finite ATE/ARE against a spread ground truth."""
        gt = golden_scene().poses(IDS)
        pred = Solution(poses={pid: Pose2.identity() for pid in IDS}, origin="pano_a")
        result = evaluate(pred, gt)
        centroid = np.mean([gt[pid].t for pid in IDS], axis=0)
        expected = [np.linalg.norm(np.asarray(gt[pid].t) - centroid) for pid in IDS]
        assert np.allclose(result.translation, expected, atol=1e-12)
        assert np.allclose(result.rotation, [abs(gt[pid].theta) for pid in IDS], atol=1e-12)

    def test_missing_node(self):
        gt = golden_scene().poses(IDS)
        pred = Solution(poses={"pano_a": Pose2.identity()}, origin="pano_a")
        with pytest.raises(ValidationError):
            evaluate(pred, gt)

    def test_greedy_on_clean_graph(self):
        """Zero-noise greedy solutions evaluate to zero error."""
        outcome = solve_cluster(golden_scene(), sample_clusters(golden_scene(), 0, sizes=(3,))[0],
                                NoiseSpec(), seed=0, width=32)
        for errors in outcome.errors.values():
            assert np.all(errors.translation < 1e-9)
            assert np.all(errors.rotation < 1e-9)


# ============================================================================
# Summary Statistics Tests
# ============================================================================

class TestSummarize:
    """Tests for mean / median / std rows."""

    def test_two_values(self):
        """{1, 3} degrees: mean 2, median 2, population std 1."""
        row = summarize([errors_from([1.0, 3.0], [0.1, 0.3])], group_size=3, method="greedy")
        assert row.rot_mean_deg == pytest.approx(2.0)
        assert row.rot_med_deg == pytest.approx(2.0)
        assert row.rot_std_deg == pytest.approx(1.0)
        assert row.tr_mean_m == pytest.approx(0.2)
        assert row.tr_std_m == pytest.approx(0.1)
        assert row.connectivity == "All"
        assert row.count == 2

    def test_single_value(self):
        row = summarize([errors_from([4.0], [0.5])], group_size=2, method="pgo")
        assert row.rot_mean_deg == pytest.approx(4.0)
        assert row.rot_std_deg == 0.0

    def test_even_count_median_is_midpoint(self):
        row = summarize([errors_from([1.0, 2.0, 4.0, 10.0], [0, 0, 0, 0])], group_size=4, method="m")
        assert row.rot_med_deg == pytest.approx(3.0)

    def test_per_cluster_pooling(self):
        """Per-cluster mode averages each cluster first."""
        errors = [errors_from([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]), errors_from([3.0], [1.0])]
        pooled = summarize(errors, group_size=3, method="m")
        per_cluster = summarize(errors, group_size=3, method="m", per_cluster=True)
        assert pooled.rot_mean_deg == pytest.approx(1.5)
        assert per_cluster.rot_mean_deg == pytest.approx(2.0)
        assert per_cluster.count == 2

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            summarize([], group_size=3, method="greedy")


# ============================================================================
# Export Tests
# ============================================================================

class TestMetricsCsv:
    """Tests for the metrics table."""

    def test_header_and_row(self):
        row = summarize([errors_from([1.0, 3.0], [0.1, 0.3])], group_size=3, method="greedy")
        lines = render_metrics_csv([row]).splitlines()
        assert lines[0] == ",".join(HEADER)
        assert lines[1] == "3,All,greedy,2.000000,2.000000,1.000000,0.200000,0.200000,0.100000"

    def test_header_only_when_empty(self):
        assert render_metrics_csv([]) == ",".join(HEADER) + "\n"

    def test_write(self, tmp_path):
        row = summarize([errors_from([1.0], [0.1])], group_size=2, method="pgo")
        path = write_metrics_csv([row], tmp_path / "out" / "metrics.csv")
        assert path.read_text(encoding="utf-8").startswith("group_size,")


class TestTopdownSvg:
    """Tests for the plan-view render."""

    def test_render_is_valid_svg(self):
        scene = golden_scene()
        gt = scene.poses(IDS)
        solution = Solution(poses=reanchor(gt, "pano_a"), origin="pano_a")
        svg = render_topdown_svg(scene, IDS, {"greedy": solution}, width=16, title="golden")
        root = ET.fromstring(svg.encode("utf-8"))
        assert root.tag.endswith("svg")

    def test_render_is_deterministic(self):
        scene = golden_scene()
        solution = Solution(poses=reanchor(scene.poses(IDS), "pano_b"), origin="pano_b")
        first = render_topdown_svg(scene, IDS, {"pgo": solution}, width=16)
        second = render_topdown_svg(scene, IDS, {"pgo": solution}, width=16)
        assert first == second


# ============================================================================
# Pipeline Service Tests
# ============================================================================

class TestPipelineService:
    """Tests for batch solving and row ordering."""

    def test_run_ordered_keeps_input_order(self):
        items = list(range(20))
        assert run_ordered(lambda x: x * x, items, threads=4) == [x * x for x in items]

    def test_method_label(self):
        noise = NoiseSpec(sigma_t=0.1, sigma_theta=0.05)
        assert method_label("greedy", noise, 1) == "greedy"
        assert method_label("pgo", noise, 2) == "pgo@t0.1_r0.05"

    def test_solve_cluster_runs_both_baselines(self):
        scene = golden_scene()
        cluster = sample_clusters(scene, 1, sizes=(3,))[0]
        outcome = solve_cluster(scene, cluster, NoiseSpec(0.1, 0.05), seed=3, width=16)
        assert list(outcome.solutions) == ["greedy", "pgo"]
        assert set(outcome.errors) == {"greedy", "pgo"}
        assert outcome.solutions["greedy"].poses == greedy_spanning_tree(outcome.graph).poses

    def test_summary_row_order(self):
        """Rows sort by size, then All/Fully/Partially, then method."""
        scene = synth_scene(seed=2, rooms=2, cameras_per_room=4, shape="notched")
        clusters = sample_clusters(scene, 2, sizes=(3, 4), samples_per_space=1)
        outcomes = solve_clusters(scene, clusters, [NoiseSpec(0.05, 0.02)], seed=2, width=16)
        rows = summarize_outcomes(outcomes, by_connectivity=True)
        conn_rank = {"All": 0, "Fully": 1, "Partially": 2}
        keys = [(r.group_size, conn_rank[r.connectivity], ["greedy", "pgo"].index(r.method)) for r in rows]
        assert keys == sorted(keys)
        assert {r.group_size for r in rows} == {3, 4}
        assert sum(1 for r in rows if r.connectivity == "All") == 4

    def test_noise_sweep_labels(self):
        """Several noise levels produce one labelled row set per level."""
        scene = golden_scene()
        clusters = sample_clusters(scene, 0, sizes=(3,))
        levels = [NoiseSpec(0.1, 0.05), NoiseSpec(0.2, 0.1)]
        rows = summarize_outcomes(solve_clusters(scene, clusters, levels, seed=0, width=16), levels=2)
        assert [r.method for r in rows] == ["greedy@t0.1_r0.05", "pgo@t0.1_r0.05",
                                            "greedy@t0.2_r0.1", "pgo@t0.2_r0.1"]
