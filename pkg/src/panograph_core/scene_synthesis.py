"""
Scene Synthesis and Sampling

Seeded, deterministic procedures that stand in for a real indoor dataset:

- synth_scene: rooms (convex by default, or L-shaped with one notch) with
  cameras sampled strictly inside, at least `margin` from every wall
- sample_clusters: draw clusters of 3/4/5 panoramas from each space
- rotate_augment: horizontal panorama shifts and the matching yaw change
- permute_origin: reorder a cluster and pick a random origin

There is no ambient RNG: every function takes its seed explicitly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import GenerationError, ValidationError
from .models import MAX_CLUSTER_SIZE, Camera, Cluster, Layout, Scene
from .pose_algebra import Pose2, compose, relative

logger = logging.getLogger(__name__)

ROOM_SHAPES = ("convex", "notched")
MAX_PLACEMENT_TRIES = 10_000


# ============================================================================
# Room and camera generation
# ============================================================================

def _convex_room(rng: np.random.Generator, size: float) -> List[Tuple[float, float]]:
    """4-8 vertices on an ellipse, in increasing angle (strictly convex, CCW)."""
    n = int(rng.integers(4, 9))
    half_a = size / 2.0
    half_b = half_a * rng.uniform(0.6, 1.0)
    spin = rng.uniform(0.0, 2.0 * math.pi)
    jitter = rng.uniform(0.2, 0.8, size=n)
    angles = 2.0 * math.pi * (np.arange(n) + jitter) / n
    return [
        (
            half_a * math.cos(a) * math.cos(spin) - half_b * math.sin(a) * math.sin(spin),
            half_a * math.cos(a) * math.sin(spin) + half_b * math.sin(a) * math.cos(spin),
        )
        for a in angles
    ]


def _notched_room(rng: np.random.Generator, size: float) -> List[Tuple[float, float]]:
    """L-shaped room: a rectangle with its upper-right corner removed."""
    w = size
    h = size * rng.uniform(0.6, 1.0)
    fx = rng.uniform(0.35, 0.65)
    fy = rng.uniform(0.35, 0.65)
    verts = [(0.0, 0.0), (w, 0.0), (w, fy * h), (fx * w, fy * h), (fx * w, h), (0.0, h)]
    return [(x - w / 2.0, y - h / 2.0) for x, y in verts]


def _place_cameras(
    rng: np.random.Generator,
    layout: Layout,
    count: int,
    margin: float,
    min_separation: float,
    height_range: Tuple[float, float],
) -> List[Camera]:
    if layout.polygon.buffer(-margin).is_empty:
        raise GenerationError(f"Room {layout.room_id} has no interior {margin} m away from its walls")
    min_x, min_y, max_x, max_y = layout.polygon.bounds
    cameras: List[Camera] = []
    tries = 0
    while len(cameras) < count:
        tries += 1
        if tries > MAX_PLACEMENT_TRIES:
            raise GenerationError(
                f"Could not place {count} cameras in room {layout.room_id} "
                f"with margin {margin} m and separation {min_separation} m"
            )
        point = (rng.uniform(min_x, max_x), rng.uniform(min_y, max_y))
        if not layout.contains(point, margin=margin):
            continue
        if any(math.dist(point, c.position) < min_separation for c in cameras):
            continue
        cameras.append(
            Camera(
                position=point,
                yaw=rng.uniform(-math.pi, math.pi),
                height=rng.uniform(*height_range),
                room_id=layout.room_id,
            )
        )
    return cameras


def synth_scene(
    seed: int,
    rooms: int = 1,
    cameras_per_room: int = 3,
    size_range: Tuple[float, float] = (3.0, 8.0),
    shape: str = "convex",
    margin: float = 0.2,
    height_range: Tuple[float, float] = (1.3, 1.7),
    min_separation: float = 0.3,
) -> Scene:
    """
    Generate a deterministic synthetic scene.

    Rooms are laid out side by side along x without overlapping; each room
    with two or more cameras becomes one space in `Scene.clusters`.
    """
    if rooms < 1 or cameras_per_room < 1:
        raise ValidationError("rooms and cameras_per_room must be positive")
    if not 0.0 < size_range[0] <= size_range[1]:
        raise ValidationError(f"Invalid size range {size_range}")
    if shape not in ROOM_SHAPES:
        raise ValidationError(f"Unknown room shape {shape!r}; expected one of {ROOM_SHAPES}")

    rng = np.random.default_rng(seed)
    pitch = size_range[1] + 2.0
    layouts: Dict[str, Layout] = {}
    panos: Dict[str, Camera] = {}
    spaces: List[Tuple[str, ...]] = []
    for r in range(rooms):
        room_id = f"room_{r:03d}"
        size = rng.uniform(*size_range)
        verts = _convex_room(rng, size) if shape == "convex" else _notched_room(rng, size)
        layout = Layout(tuple((x + r * pitch, y) for x, y in verts), room_id=room_id)
        layouts[room_id] = layout
        cams = _place_cameras(rng, layout, cameras_per_room, margin, min_separation, height_range)
        ids = []
        for c, cam in enumerate(cams):
            pano_id = f"{room_id}_pano_{c:02d}"
            panos[pano_id] = cam
            ids.append(pano_id)
        if len(ids) >= 2:
            spaces.append(tuple(ids))
    logger.debug("Synthesised scene seed=%d: %d rooms, %d panos", seed, len(layouts), len(panos))
    return Scene(rooms=layouts, panos=panos, clusters=tuple(spaces))


# ============================================================================
# Training-time sampling and augmentation
# ============================================================================

def sample_clusters(
    scene: Scene,
    seed: int,
    sizes: Iterable[int] = (3, 4, 5),
    samples_per_space: int = 1,
    unique: bool = True,
    max_size: int = MAX_CLUSTER_SIZE,
) -> List[Cluster]:
    """
    Draw clusters of each requested size from every space.

    Members of one cluster are drawn without replacement from a single
    space. With `unique`, clusters returned by one call never repeat the same
    id set; otherwise draws are independent. Spaces smaller than a size are
    skipped for that size.
    """
    sizes = sorted(set(int(s) for s in sizes))
    if not sizes or sizes[0] < 2 or sizes[-1] > max_size:
        raise ValidationError(f"Cluster sizes {sizes} must lie in [2, {max_size}]")
    rng = np.random.default_rng(seed)
    out: List[Cluster] = []
    for space in scene.clusters:
        n = len(space)
        for k in sizes:
            if k > n:
                continue
            total = math.comb(n, k)
            want = min(samples_per_space, total) if unique else samples_per_space
            seen = set()
            drawn = 0
            while drawn < want:
                idx = tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))
                if unique and idx in seen:
                    continue
                seen.add(idx)
                out.append(Cluster(tuple(space[i] for i in idx), max_size=max_size))
                drawn += 1
    return out


@dataclass(frozen=True)
class RotationAugmentation:
    """
    Per-panorama horizontal shifts and the resulting poses.

    A shift of s columns rotates the panorama's yaw by 2*pi*s/W; cue rows of
    that panorama are consumed through shift_row().
    """
    width: int
    shifts: Dict[str, int]
    poses: Dict[str, Pose2]

    def yaw_offset(self, pano_id: str) -> float:
        return 2.0 * math.pi * self.shifts[pano_id] / self.width

    def shift_row(self, pano_id: str, row: np.ndarray) -> np.ndarray:
        return np.roll(np.asarray(row), -self.shifts[pano_id])

    def original_relative(self, src: str, dst: str) -> Pose2:
        """Undo the frame offsets: relative pose before augmentation."""
        rel = relative(self.poses[src], self.poses[dst])
        return compose(
            compose(Pose2.from_angle(self.yaw_offset(src)), rel),
            Pose2.from_angle(-self.yaw_offset(dst)),
        )


def rotate_augment(poses: Mapping[str, Pose2], width: int, seed: int) -> RotationAugmentation:
    """
    Draw an integer shift in [0, W) per panorama and rotate its yaw by 2*pi*s/W.

    Camera positions are untouched.
    """
    if width <= 0:
        raise ValidationError(f"Width must be positive, got {width}")
    rng = np.random.default_rng(seed)
    shifts = {pid: int(rng.integers(0, width)) for pid in poses}
    return augment_with_shifts(poses, width, shifts)


def augment_with_shifts(poses: Mapping[str, Pose2], width: int, shifts: Mapping[str, int]) -> RotationAugmentation:
    """rotate_augment with explicit shifts."""
    out = {
        pid: compose(pose, Pose2.from_angle(2.0 * math.pi * shifts[pid] / width))
        for pid, pose in poses.items()
    }
    return RotationAugmentation(width=width, shifts=dict(shifts), poses=out)


def augmented_scene(scene: Scene, augmentation: RotationAugmentation) -> Scene:
    """Scene whose cameras carry the augmented yaws."""
    panos = dict(scene.panos)
    for pid in augmentation.shifts:
        cam = scene.camera(pid)
        panos[pid] = cam.with_yaw(cam.yaw + augmentation.yaw_offset(pid))
    return Scene(rooms=scene.rooms, panos=panos, clusters=scene.clusters)


def permute_origin(cluster: Cluster, seed: int) -> Cluster:
    """
    Random node order and uniformly random origin; same id set.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(cluster.size)
    ids = tuple(cluster.pano_ids[i] for i in order)
    return Cluster(ids, origin_index=int(rng.integers(cluster.size)), max_size=cluster.max_size)


def cluster_from_ids(pano_ids: Sequence[str], origin: str = "", seed: int = 0,
                     max_size: int = MAX_CLUSTER_SIZE) -> Cluster:
    """
    Build a Cluster whose origin is the named panorama (default: first).

    Larger groups are down-sampled to `max_size`: the origin is always kept,
    the other members are drawn without replacement from `seed`, and the
    input order is preserved.
    """
    ids = tuple(pano_ids)
    if origin and origin not in ids:
        raise ValidationError(f"Origin {origin} is not a member of {ids}")
    origin = origin or (ids[0] if ids else "")
    if len(ids) > max_size:
        others = [k for k, pid in enumerate(ids) if pid != origin]
        rng = np.random.default_rng(seed)
        keep = set(int(k) for k in rng.choice(others, size=max_size - 1, replace=False))
        keep.add(ids.index(origin))
        logger.info("Down-sampled a %d-panorama group to %d (seed %d)", len(ids), max_size, seed)
        ids = tuple(ids[k] for k in sorted(keep))
    index = ids.index(origin) if origin else 0
    return Cluster(ids, origin_index=index, max_size=max_size)
