"""
Planar Pose Algebra

Exact SE(2) arithmetic used by every other module.

Convention: a Pose2 maps camera-frame coordinates into the world frame
("world-from-camera"). The origin panorama of a cluster has the identity
pose, so every other pose is expressed in the origin camera's frame.

Rotation is stored as a unit vector r = (cos θ, sin θ), matching the
4-parameter (r, t) pose a decoder emits, and is renormalised after every
composition so that long chains do not drift off the unit circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * math.pi
UNIT_TOL = 1e-9

# Scalar angle in radians, canonically wrapped to (-pi, pi].
Angle = float


def wrap_angle(x: float) -> Angle:
    """
    Wrap an angle to (-pi, pi]. -pi maps to +pi.
    """
    y = math.remainder(x, TWO_PI)
    if y <= -math.pi:
        y += TWO_PI
    return y


def wrap_angles(x: np.ndarray) -> np.ndarray:
    """Vectorised wrap_angle."""
    x = np.asarray(x, dtype=float)
    y = x - TWO_PI * np.round(x / TWO_PI)
    y = np.where(y <= -math.pi, y + TWO_PI, y)
    return np.where(y > math.pi, y - TWO_PI, y)


@dataclass(frozen=True)
class Pose2:
    """
    Planar rigid pose.

    Attributes:
        r: unit rotation vector (cos θ, sin θ)
        t: translation in meters
    """
    r: Tuple[float, float]
    t: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        r = (float(self.r[0]), float(self.r[1]))
        t = (float(self.t[0]), float(self.t[1]))
        if not all(math.isfinite(v) for v in r + t):
            raise ValidationError(f"Pose2 has non-finite components: r={r}, t={t}")
        if abs(math.hypot(*r) - 1.0) > UNIT_TOL:
            raise ValidationError(f"Pose2 rotation vector {r} is not unit length")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "t", t)

    # ------------------------------------------------------------------ #
    # Constructors
    # ------------------------------------------------------------------ #

    @classmethod
    def identity(cls) -> "Pose2":
        return cls((1.0, 0.0), (0.0, 0.0))

    @classmethod
    def from_angle(cls, theta: float, t: Sequence[float] = (0.0, 0.0)) -> "Pose2":
        return cls((math.cos(theta), math.sin(theta)), (t[0], t[1]))

    @classmethod
    def from_vector(cls, r: Sequence[float], t: Sequence[float]) -> "Pose2":
        """
        Build a pose from a rotation vector of any non-zero length.
        """
        n = math.hypot(r[0], r[1])
        if n < 1e-12:
            raise ValidationError("Cannot normalise a zero rotation vector")
        return cls((r[0] / n, r[1] / n), (t[0], t[1]))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose2":
        """Build from a 3x3 homogeneous matrix."""
        return cls.from_vector((m[0, 0], m[1, 0]), (m[0, 2], m[1, 2]))

    # ------------------------------------------------------------------ #
    # Accessors
    # ------------------------------------------------------------------ #

    @property
    def theta(self) -> Angle:
        return wrap_angle(math.atan2(self.r[1], self.r[0]))

    @property
    def translation(self) -> np.ndarray:
        return np.array(self.t, dtype=float)

    def rotation_matrix(self) -> np.ndarray:
        c, s = self.r
        return np.array([[c, -s], [s, c]])

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix."""
        c, s = self.r
        return np.array([[c, -s, self.t[0]], [s, c, self.t[1]], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {"theta": self.theta, "t": [self.t[0], self.t[1]]}

    @classmethod
    def from_dict(cls, data: dict) -> "Pose2":
        return cls.from_angle(float(data["theta"]), data["t"])

    def __matmul__(self, other: "Pose2") -> "Pose2":
        return compose(self, other)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """
    Rigid map a∘b (apply b, then a): R = Ra Rb, t = Ra tb + ta.
    """
    ca, sa = a.r
    cb, sb = b.r
    c = ca * cb - sa * sb
    s = sa * cb + ca * sb
    n = math.hypot(c, s)
    tx = ca * b.t[0] - sa * b.t[1] + a.t[0]
    ty = sa * b.t[0] + ca * b.t[1] + a.t[1]
    return Pose2((c / n, s / n), (tx, ty))


def inverse(p: Pose2) -> Pose2:
    c, s = p.r
    tx, ty = p.t
    return Pose2((c, -s), (-(c * tx + s * ty), s * tx - c * ty))


def relative(world_from_i: Pose2, world_from_j: Pose2) -> Pose2:
    """
    Pose of camera j expressed in camera i's frame.
    """
    return compose(inverse(world_from_i), world_from_j)


def apply(p: Pose2, point: Sequence[float]) -> np.ndarray:
    """R·point + t for one point."""
    c, s = p.r
    x, y = float(point[0]), float(point[1])
    return np.array([c * x - s * y + p.t[0], s * x + c * y + p.t[1]])


def apply_points(p: Pose2, points: np.ndarray) -> np.ndarray:
    """R·point + t for an (N, 2) array."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return pts @ p.rotation_matrix().T + np.asarray(p.t)


def chain(poses: Iterable[Pose2]) -> Pose2:
    """Left-to-right composition of a sequence of poses."""
    out = Pose2.identity()
    for p in poses:
        out = compose(out, p)
    return out
