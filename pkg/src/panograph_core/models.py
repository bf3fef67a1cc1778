"""
PanoGraph Scene Models

Ground-truth world entities shared by cue synthesis, graph construction and
evaluation:

- Layout: a room polygon (counter-clockwise, implicitly closed)
- Camera: a panorama's planar extrinsics plus its fixed height
- Scene: rooms, panoramas and the co-located groups ("spaces") they form
- Cluster: the ordered panorama set a solver works on, with its origin

All models are immutable; validation happens at construction time and
raises ValidationError naming the offending entity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from shapely.geometry import LinearRing, Point, Polygon

from .errors import ValidationError
from .pose_algebra import Pose2, wrap_angle

MAX_CLUSTER_SIZE = 5

Point2 = Tuple[float, float]


def signed_area(vertices: Sequence[Point2]) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    pts = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Layout:
    """
    Room layout polygon in meters.

    Invariants: at least 3 vertices, simple, counter-clockwise.
    """
    vertices: Tuple[Point2, ...]
    room_id: str = ""

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        label = self.room_id or "<layout>"
        if len(verts) < 3:
            raise ValidationError(f"Room {label} has {len(verts)} vertices; need at least 3")
        if not LinearRing(verts).is_simple:
            raise ValidationError(f"Room {label} is not a simple polygon")
        if signed_area(verts) <= 0.0:
            raise ValidationError(f"Room {label} is not counter-clockwise (signed area <= 0)")
        object.__setattr__(self, "vertices", verts)

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)

    @cached_property
    def edges(self) -> np.ndarray:
        """(V, 2, 2) array of wall segments, each (start, end) in ring order."""
        pts = np.asarray(self.vertices, dtype=float)
        return np.stack([pts, np.roll(pts, -1, axis=0)], axis=1)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def contains(self, point: Sequence[float], margin: float = 0.0) -> bool:
        """
        True if the point lies strictly inside, at least `margin` from every wall.
        """
        p = Point(float(point[0]), float(point[1]))
        if not self.polygon.contains(p):
            return False
        return margin <= 0.0 or self.polygon.exterior.distance(p) >= margin

    def is_convex(self) -> bool:
        pts = np.asarray(self.vertices)
        a = np.roll(pts, 1, axis=0)
        b = np.roll(pts, -1, axis=0)
        cross = (pts[:, 0] - a[:, 0]) * (b[:, 1] - pts[:, 1]) - (pts[:, 1] - a[:, 1]) * (b[:, 0] - pts[:, 0])
        return bool(np.all(cross >= -1e-12))

    def to_dict(self) -> Dict:
        return {"id": self.room_id, "vertices": [[x, y] for x, y in self.vertices]}


@dataclass(frozen=True)
class Camera:
    """
    Upright panorama camera under planar motion.

    Attributes:
        position: world position in meters
        yaw: heading in radians, wrapped to (-pi, pi]
        height: camera height above the floor in meters
        room_id: the room whose layout contains the camera
    """
    position: Point2
    yaw: float
    height: float
    room_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        if not self.height > 0.0:
            raise ValidationError(f"Camera in room {self.room_id} has non-positive height {self.height}")

    @property
    def pose(self) -> Pose2:
        """World-from-camera pose."""
        return Pose2.from_angle(self.yaw, self.position)

    def with_yaw(self, yaw: float) -> "Camera":
        return Camera(self.position, yaw, self.height, self.room_id)


@dataclass(frozen=True)
class Cluster:
    """
    Ordered group of co-located panoramas handed to a solver.

    The panorama at origin_index defines the shared coordinate frame.
    """
    pano_ids: Tuple[str, ...]
    origin_index: int = 0
    max_size: int = field(default=MAX_CLUSTER_SIZE, compare=False)

    def __post_init__(self) -> None:
        ids = tuple(str(p) for p in self.pano_ids)
        object.__setattr__(self, "pano_ids", ids)
        if len(ids) < 2:
            raise ValidationError(f"Cluster {ids} needs at least 2 panoramas")
        if len(ids) > self.max_size:
            raise ValidationError(f"Cluster {ids} exceeds the maximum size {self.max_size}")
        if len(set(ids)) != len(ids):
            raise ValidationError(f"Cluster {ids} repeats a panorama")
        if not 0 <= self.origin_index < len(ids):
            raise ValidationError(f"Cluster {ids} has invalid origin_index {self.origin_index}")

    @property
    def size(self) -> int:
        return len(self.pano_ids)

    @property
    def origin_id(self) -> str:
        return self.pano_ids[self.origin_index]

    def to_dict(self) -> Dict:
        return {"pano_ids": list(self.pano_ids), "origin_index": self.origin_index}


@dataclass(frozen=True)
class Scene:
    """
    Ground-truth world.

    Attributes:
        rooms: room id -> Layout
        panos: pano id -> Camera
        clusters: groups of co-located pano ids ("spaces"); any size >= 2
    """
    rooms: Dict[str, Layout]
    panos: Dict[str, Camera]
    clusters: Tuple[Tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "clusters", tuple(tuple(c) for c in self.clusters))
        if not self.rooms:
            raise ValidationError("Scene has no rooms")
        for pano_id, cam in self.panos.items():
            layout = self.rooms.get(cam.room_id)
            if layout is None:
                raise ValidationError(f"Pano {pano_id} references unknown room {cam.room_id}")
            if not layout.contains(cam.position):
                raise ValidationError(f"Pano {pano_id} lies outside its room {cam.room_id}")
        for idx, group in enumerate(self.clusters):
            if len(group) < 2 or len(set(group)) != len(group):
                raise ValidationError(f"Cluster #{idx} {group} needs at least 2 distinct panoramas")
            missing = [p for p in group if p not in self.panos]
            if missing:
                raise ValidationError(f"Cluster #{idx} references unknown panos {missing}")

    def camera(self, pano_id: str) -> Camera:
        try:
            return self.panos[pano_id]
        except KeyError:
            raise ValidationError(f"Unknown pano {pano_id}") from None

    def layout_of(self, pano_id: str) -> Layout:
        return self.rooms[self.camera(pano_id).room_id]

    def poses(self, pano_ids: Iterable[str]) -> Dict[str, Pose2]:
        return {p: self.camera(p).pose for p in pano_ids}

    def space_room_ids(self, pano_ids: Sequence[str]) -> List[str]:
        """
        Rooms forming the space shared by the given panoramas.

        A space is the union of the rooms of every group in `clusters` that
        contains all of the given panoramas; without such a group it falls
        back to the rooms of the panoramas themselves.
        """
        wanted = set(pano_ids)
        rooms: List[str] = []
        for group in self.clusters:
            if wanted.issubset(group):
                for p in group:
                    rid = self.panos[p].room_id
                    if rid not in rooms:
                        rooms.append(rid)
        for p in pano_ids:
            rid = self.camera(p).room_id
            if rid not in rooms:
                rooms.append(rid)
        return rooms

    def space_walls(self, pano_ids: Sequence[str]) -> np.ndarray:
        """(E, 2, 2) wall segments of every room in the shared space."""
        return np.concatenate([self.rooms[r].edges for r in self.space_room_ids(pano_ids)], axis=0)

    def to_dict(self) -> Dict:
        return {
            "version": 1,
            "rooms": [layout.to_dict() | {"id": rid} for rid, layout in self.rooms.items()],
            "panos": [
                {
                    "id": pid,
                    "room_id": cam.room_id,
                    "position": [cam.position[0], cam.position[1]],
                    "yaw_rad": cam.yaw,
                    "height_m": cam.height,
                }
                for pid, cam in self.panos.items()
            ],
            "clusters": [list(group) for group in self.clusters],
        }
