"""
Top-Down SVG Render

Static plan view of one cluster: room outlines, ground-truth cameras, and
each method's predictions aligned into the world frame. Every predicted
camera also projects its boundary-angle row onto the floor, so layout
misregistration is visible alongside pose error.
"""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from panograph_core.cues import DEFAULT_WIDTH, boundary_angle_row, boundary_points  # noqa: E402
from panograph_core.models import Scene  # noqa: E402
from panograph_core.pose_algebra import Pose2, compose  # noqa: E402
from panograph_core.storage import PathLike, atomic_write  # noqa: E402
from panograph_eval.alignment import evaluate  # noqa: E402
from panograph_solvers.models import Solution  # noqa: E402

logger = logging.getLogger(__name__)

METHOD_COLORS = ("tab:red", "tab:green", "tab:purple", "tab:orange", "tab:brown")
HEADING_LENGTH = 0.3


def _draw_camera(ax, pose: Pose2, color: str, marker: str, label: str = "") -> None:
    x, y = pose.t
    c, s = pose.r
    ax.plot([x], [y], marker=marker, color=color, linestyle="none", label=label or None)
    ax.plot([x, x + HEADING_LENGTH * c], [y, y + HEADING_LENGTH * s], color=color, linewidth=1.0)


def render_topdown_svg(
    scene: Scene,
    pano_ids: Sequence[str],
    solutions: Mapping[str, Solution],
    width: int = DEFAULT_WIDTH,
    title: str = "",
) -> str:
    """SVG text for the cluster; `solutions` maps method label -> Solution."""
    matplotlib.rcParams["svg.hashsalt"] = "panograph"
    gt = scene.poses(pano_ids)
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        for rid in scene.space_room_ids(pano_ids):
            verts = list(scene.rooms[rid].vertices)
            xs = [v[0] for v in verts] + [verts[0][0]]
            ys = [v[1] for v in verts] + [verts[0][1]]
            ax.plot(xs, ys, color="black", linewidth=1.5)

        for k, pid in enumerate(pano_ids):
            _draw_camera(ax, gt[pid], "tab:blue", "o", "ground truth" if k == 0 else "")
            ax.annotate(pid, gt[pid].t, fontsize=6, xytext=(3, 3), textcoords="offset points")

        rows = {pid: boundary_angle_row(scene.camera(pid), scene.layout_of(pid), width) for pid in pano_ids}
        for m, (method, solution) in enumerate(solutions.items()):
            color = METHOD_COLORS[m % len(METHOD_COLORS)]
            transform = evaluate(solution, gt).transform
            for k, pid in enumerate(pano_ids):
                world = compose(transform, solution.poses[pid])
                _draw_camera(ax, world, color, "x", method if k == 0 else "")
                pts = boundary_points(world, scene.camera(pid).height, rows[pid])
                ax.plot(pts[:, 0], pts[:, 1], color=color, linewidth=0.5, alpha=0.6)

        ax.set_aspect("equal")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right", fontsize=7)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        return buf.getvalue()
    finally:
        plt.close(fig)


def write_topdown_svg(scene: Scene, pano_ids: Sequence[str], solutions: Mapping[str, Solution],
                      path: PathLike, width: int = DEFAULT_WIDTH, title: str = "") -> Path:
    svg = render_topdown_svg(scene, pano_ids, solutions, width, title)
    logger.debug("Rendered top-down view of %s", list(pano_ids))
    return atomic_write(path, svg)
