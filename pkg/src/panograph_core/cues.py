"""
Column-wise Cue Synthesis

Ground-truth dense cues for an ordered panorama pair (i -> j), one value per
equirectangular column of panorama i:

- phi:   floor-wall boundary angle below the horizon, atan2(height, distance)
- alpha: azimuth, in camera j's frame, of the floor-boundary point that
         column k of i observes; MASKED where j cannot see that point
- covis: 1 where the point is visible from j, else 0

These are geometric reconstructions on the floor plane: the boundary point is
the first wall hit by the column's horizontal ray, and visibility is a
line-of-sight test against every wall of the shared space.

Column model: column k has azimuth psi_k = -pi + 2*pi*(k + 0.5) / W in the
camera frame, counter-clockwise positive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import GeometryError, ValidationError
from .models import Camera, Layout, Scene
from .pose_algebra import Angle, Pose2, apply_points, wrap_angle, wrap_angles

DEFAULT_WIDTH = 512
# Encoded value for a masked correspondence; lies outside (-pi, pi].
MASKED = 4.0
# Grazing tolerance: segments touching a wall within EPS count as blocked.
EPS = 1e-9

PairKey = Tuple[str, str]


@dataclass(frozen=True)
class ColumnRay:
    """Equirectangular column and its camera-frame azimuth."""
    column: int
    azimuth: Angle

    @classmethod
    def at(cls, column: int, width: int) -> "ColumnRay":
        if not 0 <= column < width:
            raise ValidationError(f"Column {column} outside [0, {width})")
        return cls(column, wrap_angle(-math.pi + 2.0 * math.pi * (column + 0.5) / width))


def column_azimuths(width: int) -> np.ndarray:
    """Azimuth psi_k of every column centre."""
    k = np.arange(width, dtype=float)
    return wrap_angles(-math.pi + 2.0 * math.pi * (k + 0.5) / width)


@dataclass(frozen=True)
class CueSet:
    """
    Dense cues for the ordered pair (src -> dst).

    Ground-truth sets (predicted=False) hold covis in {0, 1} and satisfy
    covis[k] == 0  <=>  alpha[k] == MASKED. Predicted sets hold covis in [0, 1].
    """
    src: str
    dst: str
    width: int
    phi: np.ndarray
    alpha: np.ndarray
    covis: np.ndarray
    predicted: bool = False

    def __post_init__(self) -> None:
        for name in ("phi", "alpha", "covis"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.width,):
                raise ValidationError(
                    f"CueSet {self.src}->{self.dst}: {name} has shape {arr.shape}, expected ({self.width},)"
                )
            object.__setattr__(self, name, arr)
        if not np.all(np.isfinite(self.phi)):
            raise ValidationError(f"CueSet {self.src}->{self.dst}: phi must be defined for every column")
        if not self.predicted:
            if not np.all((self.covis == 0.0) | (self.covis == 1.0)):
                raise ValidationError(f"CueSet {self.src}->{self.dst}: ground-truth covis must be 0/1")
            if not np.array_equal(self.covis == 0.0, self.alpha == MASKED):
                raise ValidationError(f"CueSet {self.src}->{self.dst}: mask and covis disagree")

    @property
    def visible(self) -> np.ndarray:
        return self.covis > 0.5

    def to_dict(self) -> Dict:
        alpha = [None if (not self.predicted and a == MASKED) else float(a) for a in self.alpha]
        return {
            "src": self.src,
            "dst": self.dst,
            "width": self.width,
            "phi": [float(v) for v in self.phi],
            "alpha": alpha,
            "covis": [int(v) if not self.predicted else float(v) for v in self.covis],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CueSet":
        alpha = np.array([MASKED if a is None else a for a in data["alpha"]], dtype=float)
        return cls(
            src=data["src"],
            dst=data["dst"],
            width=int(data["width"]),
            phi=np.asarray(data["phi"], dtype=float),
            alpha=alpha,
            covis=np.asarray(data["covis"], dtype=float),
        )


# ============================================================================
# Ray casting
# ============================================================================

def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _cast_rays(origin: np.ndarray, directions: np.ndarray, walls: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nearest wall hit for each unit direction.

    Returns (distance (K,), wall index (K,)). Raises GeometryError when a ray
    escapes, which can only happen if the origin is not inside the layout.
    """
    start = walls[:, 0, :]
    span = walls[:, 1, :] - start
    to_start = start - origin
    denom = _cross(directions[:, None, :], span[None, :, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        s = _cross(to_start, span)[None, :] / denom
        u = _cross(to_start[None, :, :], directions[:, None, :]) / denom
    ok = (np.abs(denom) > 1e-15) & (s > EPS) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
    dist = np.where(ok, s, np.inf)
    idx = np.argmin(dist, axis=1)
    best = dist[np.arange(len(directions)), idx]
    if not np.all(np.isfinite(best)):
        raise GeometryError(f"Ray from {tuple(origin)} found no wall; camera is not inside its layout")
    return best, idx


def boundary_hit(camera: Camera, layout: Layout, azimuth: Angle) -> Tuple[np.ndarray, float]:
    """
    First wall point along the column ray at camera-frame `azimuth`.
    """
    heading = camera.yaw + azimuth
    direction = np.array([[math.cos(heading), math.sin(heading)]])
    origin = np.asarray(camera.position)
    dist, _ = _cast_rays(origin, direction, layout.edges)
    return origin + dist[0] * direction[0], float(dist[0])


def boundary_hits(camera: Camera, layout: Layout, width: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Hit points (W, 2), distances (W,) and wall indices (W,) for every column.
    """
    heading = camera.yaw + column_azimuths(width)
    directions = np.stack([np.cos(heading), np.sin(heading)], axis=1)
    origin = np.asarray(camera.position)
    dist, idx = _cast_rays(origin, directions, layout.edges)
    return origin + dist[:, None] * directions, dist, idx


def boundary_angle_row(camera: Camera, layout: Layout, width: int) -> np.ndarray:
    """phi_k = atan2(camera height, horizontal boundary distance)."""
    _, dist, _ = boundary_hits(camera, layout, width)
    return np.arctan2(camera.height, dist)


def boundary_points(pose: Pose2, height: float, phi: np.ndarray) -> np.ndarray:
    """
    Project a boundary-angle row back onto the floor plane, in the frame of `pose`.
    """
    phi = np.asarray(phi, dtype=float)
    psi = column_azimuths(len(phi))
    dist = height / np.tan(phi)
    local = np.stack([dist * np.cos(psi), dist * np.sin(psi)], axis=1)
    return apply_points(pose, local)


# ============================================================================
# Visibility and correspondence
# ============================================================================

def segments_clear(viewer: np.ndarray, targets: np.ndarray, walls: np.ndarray) -> np.ndarray:
    """
    True where the open segment viewer -> target crosses no wall.

    Touching a wall anywhere except the target end counts as blocked.
    """
    span = targets - viewer
    start = walls[:, 0, :]
    wall = walls[:, 1, :] - start
    to_start = start - viewer
    denom = _cross(span[:, None, :], wall[None, :, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        s = _cross(to_start, wall)[None, :] / denom
        u = _cross(to_start[None, :, :], span[:, None, :]) / denom
    hit = (np.abs(denom) > 1e-15) & (s > EPS) & (s < 1.0 - EPS) & (u >= -EPS) & (u <= 1.0 + EPS)
    return ~np.any(hit, axis=1)


def correspondence_and_covis(scene: Scene, src: str, dst: str, width: int = DEFAULT_WIDTH) -> CueSet:
    """
    Ground-truth cues for the ordered pair src -> dst.
    """
    cam_i = scene.camera(src)
    cam_j = scene.camera(dst)
    layout_i = scene.layout_of(src)
    points, dist, wall_idx = boundary_hits(cam_i, layout_i, width)
    phi = np.arctan2(cam_i.height, dist)

    viewer = np.asarray(cam_j.position)
    walls = scene.space_walls([src, dst])
    clear = segments_clear(viewer, points, walls)

    # the hit wall must face the viewer
    hit_walls = layout_i.edges[wall_idx]
    facing = _cross(hit_walls[:, 1] - hit_walls[:, 0], viewer[None, :] - hit_walls[:, 0]) > EPS
    visible = clear & facing

    offset = points - viewer
    alpha = wrap_angles(np.arctan2(offset[:, 1], offset[:, 0]) - cam_j.yaw)
    alpha = np.where(visible, alpha, MASKED)
    return CueSet(src, dst, width, phi, alpha, visible.astype(float))


def edge_covis_score(cue: CueSet) -> float:
    """Mean co-visibility over columns."""
    return float(np.mean(cue.covis))


def cluster_cues(scene: Scene, pano_ids: Sequence[str], width: int = DEFAULT_WIDTH) -> Dict[PairKey, CueSet]:
    """Cues for every ordered pair of the given panoramas."""
    return {
        (i, j): correspondence_and_covis(scene, i, j, width)
        for i, j in itertools.permutations(pano_ids, 2)
    }


@dataclass(frozen=True)
class RoundTrip:
    """Per co-visible column of i: azimuth recovered through j, and its error."""
    columns: np.ndarray
    recovered: np.ndarray
    error: np.ndarray

    def fraction_within(self, tol: float) -> float:
        if len(self.error) == 0:
            return 1.0
        return float(np.mean(self.error <= tol))


def correspondence_round_trip(cue_ij: CueSet, cue_ji: CueSet, interpolate: bool = True) -> RoundTrip:
    """
    Map each co-visible alpha^{ij}_k into j's columns and read alpha^{ji} back.

    With `interpolate`, the two columns of j bracketing alpha^{ij}_k are
    blended linearly (circularly, on the wrapped difference); a masked
    neighbour falls back to the visible one. Columns whose neighbours are
    both masked get an infinite error.
    """
    if cue_ij.width != cue_ji.width:
        raise ValidationError("Round trip needs cue sets of equal width")
    width = cue_ij.width
    psi = column_azimuths(width)
    cols = np.flatnonzero(cue_ij.visible)
    recovered = np.full(len(cols), np.nan)
    error = np.full(len(cols), np.inf)
    back_visible = cue_ji.visible
    for n, k in enumerate(cols):
        x = (cue_ij.alpha[k] + math.pi) * width / (2.0 * math.pi) - 0.5
        if interpolate:
            base = math.floor(x)
            frac = x - base
            k0, k1 = base % width, (base + 1) % width
            if back_visible[k0] and back_visible[k1]:
                a0 = cue_ji.alpha[k0]
                value = a0 + frac * wrap_angle(cue_ji.alpha[k1] - a0)
            elif back_visible[k0] or back_visible[k1]:
                value = cue_ji.alpha[k0] if back_visible[k0] else cue_ji.alpha[k1]
            else:
                continue
        else:
            near = int(round(x)) % width
            if not back_visible[near]:
                continue
            value = cue_ji.alpha[near]
        recovered[n] = wrap_angle(value)
        error[n] = abs(wrap_angle(value - psi[k]))
    return RoundTrip(cols, recovered, error)


def shifted_row(row: np.ndarray, shift: int) -> np.ndarray:
    """
    Row as seen by a panorama whose yaw grew by 2*pi*shift/W: new[k] = old[k + shift].
    """
    return np.roll(np.asarray(row), -int(shift))


def predicted_cueset(src: str, dst: str, phi: np.ndarray, alpha: np.ndarray, covis: np.ndarray,
                     width: Optional[int] = None) -> CueSet:
    """Wrap decoder output rows as a predicted CueSet."""
    w = width if width is not None else len(phi)
    return CueSet(src, dst, w, phi, alpha, covis, predicted=True)
