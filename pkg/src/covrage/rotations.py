"""Quaternion algebra, shortest-arc interpolation, and direction coordinate charts.

Rotations use Hamilton products with scalar-first (w, x, y, z) storage and
right-handed frames. A quaternion and its negation describe the same rotation,
so every constructed quaternion is canonicalized to w >= 0 (ties broken by the
first nonzero vector component being positive). All values are immutable and
all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateRotationError",
    "UnitQuaternion",
    "SphericalDirection",
    "UVPoint",
    "compose",
    "active_rotation",
    "slerp",
    "direction_to_uv",
    "uv_to_direction",
    "apply_rotation",
]

_UNIT_TOL = 1e-9


class DegenerateRotationError(ValueError):
    """Raised when an interpolation axis is ambiguous (relative rotation of pi)."""


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion representing an orientation or rotation.

    Construction normalizes to unit length and canonicalizes the sign, so
    ``UnitQuaternion(*q) == UnitQuaternion(*(-q))`` componentwise.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if norm < 1e-12:
            raise ValueError("zero quaternion cannot be normalized")
        w, x, y, z = self.w / norm, self.x / norm, self.y / norm, self.z / norm
        # Canonical sign: w > 0, ties broken by first nonzero component.
        flip = False
        for c in (w, x, y, z):
            if c != 0.0:
                flip = c < 0.0
                break
        if flip:
            w, x, y, z = -w, -x, -y, -z
        object.__setattr__(self, "w", float(w))
        object.__setattr__(self, "x", float(x))
        object.__setattr__(self, "y", float(y))
        object.__setattr__(self, "z", float(z))

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "UnitQuaternion":
        """Quaternion rotating by ``angle`` radians about ``axis`` (3-vector)."""
        ax = np.asarray(axis, dtype=float)
        n = np.linalg.norm(ax)
        if n < 1e-12:
            return UnitQuaternion.identity()
        ax = ax / n
        half = 0.5 * angle
        s = math.sin(half)
        return UnitQuaternion(math.cos(half), s * ax[0], s * ax[1], s * ax[2])

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def rotation_angle(self) -> float:
        """Rotation angle in [0, pi]."""
        return 2.0 * math.acos(min(1.0, max(-1.0, abs(self.w))))

    def axis_angle(self) -> tuple[np.ndarray, float]:
        """Rotation axis (unit 3-vector) and angle in [0, pi].

        The axis of a (near-)identity rotation is arbitrary; +x is returned.
        """
        angle = self.rotation_angle()
        s = math.sqrt(max(0.0, 1.0 - self.w * self.w))
        if s < 1e-12:
            return np.array([1.0, 0.0, 0.0]), angle
        return np.array([self.x / s, self.y / s, self.z / s]), angle

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def rotation_matrix(self) -> np.ndarray:
        """Equivalent 3x3 rotation matrix (acts on column vectors)."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def rotate_vector(self, v) -> np.ndarray:
        """Rotate a 3-vector by this quaternion."""
        v = np.asarray(v, dtype=float)
        q = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(q, v)
        return v + self.w * t + np.cross(q, t)

    def approx_equal(self, other: "UnitQuaternion", tol: float = _UNIT_TOL) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), atol=tol))


@dataclass(frozen=True)
class SphericalDirection:
    """Direction as azimuth/elevation in radians; broadside is (0, 0).

    Azimuth lies in [-pi, pi) and elevation in [-pi/2, pi/2]; azimuth magnitudes
    above pi/2 describe directions behind the array plane.
    """

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = math.remainder(self.azimuth, 2.0 * math.pi)
        if az >= math.pi:  # remainder returns (-pi, pi]; fold pi to -pi
            az -= 2.0 * math.pi
        el = self.elevation
        if not -math.pi / 2 - 1e-12 <= el <= math.pi / 2 + 1e-12:
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        el = min(math.pi / 2, max(-math.pi / 2, el))
        object.__setattr__(self, "azimuth", float(az))
        object.__setattr__(self, "elevation", float(el))

    @property
    def is_front(self) -> bool:
        """True when the direction lies in the hemisphere visible to the array."""
        return abs(self.azimuth) <= math.pi / 2

    def unit_vector(self) -> np.ndarray:
        """Cartesian unit vector: x east, y up, z broadside."""
        ca = math.cos(self.azimuth)
        ce = math.cos(self.elevation)
        return np.array([ce * math.sin(self.azimuth), math.sin(self.elevation), ce * ca])

    @staticmethod
    def from_unit_vector(v) -> "SphericalDirection":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise ValueError("zero vector has no direction")
        x, y, z = v / n
        return SphericalDirection(math.atan2(x, z), math.asin(min(1.0, max(-1.0, y))))


@dataclass(frozen=True)
class UVPoint:
    """Direction-cosine coordinates (u, v) of the visible hemisphere."""

    u: float
    v: float

    def __post_init__(self):
        if self.u * self.u + self.v * self.v > 1.0 + 1e-9:
            raise ValueError(f"({self.u}, {self.v}) lies outside the unit disk")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


def compose(q: UnitQuaternion, p: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product q*p: the rotation applying p first, then q."""
    w1, x1, y1, z1 = q.w, q.x, q.y, q.z
    w2, x2, y2, z2 = p.w, p.x, p.y, p.z
    return UnitQuaternion(
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )


def active_rotation(q_from: UnitQuaternion, q_to: UnitQuaternion) -> UnitQuaternion:
    """Apparent rotation of static surroundings when the observer turns.

    When the observer's orientation moves from ``q_from`` to ``q_to``, a fixed
    point in the room appears to rotate by ``q_from * conj(q_to)`` in the
    observer's frame; its matrix equals R(q_from) @ R(q_to).T.
    """
    return compose(q_from, q_to.conjugate())


def slerp(q: UnitQuaternion, p: UnitQuaternion, a: float) -> UnitQuaternion:
    """Spherical linear interpolation from q (a=0) to p (a=1), shortest arc.

    Raises DegenerateRotationError when q and p differ by a rotation of exactly
    pi, where the shortest arc is ambiguous.
    """
    qa = q.as_array()
    pa = p.as_array()
    dot = float(qa @ pa)
    if dot < 0.0:
        pa = -pa
        dot = -dot
    if dot < 1e-9:
        raise DegenerateRotationError("endpoints differ by a half-turn; arc is ambiguous")
    dot = min(1.0, dot)
    omega = math.acos(dot)
    if omega < 1e-9:
        out = (1.0 - a) * qa + a * pa  # nlerp is exact to first order here
    else:
        so = math.sin(omega)
        out = math.sin((1.0 - a) * omega) / so * qa + math.sin(a * omega) / so * pa
    return UnitQuaternion(*out)


def direction_to_uv(d: SphericalDirection) -> UVPoint:
    """Project a direction onto (u, v) = (cos(el) sin(az), sin(el))."""
    return UVPoint(
        math.cos(d.elevation) * math.sin(d.azimuth),
        math.sin(d.elevation),
    )


def uv_to_direction(p: UVPoint) -> SphericalDirection:
    """Front-hemisphere direction of a (u, v) point; rejects u^2 + v^2 > 1."""
    r2 = p.u * p.u + p.v * p.v
    if r2 > 1.0 + 1e-12:
        raise ValueError("u^2 + v^2 > 1 has no direction")
    el = math.asin(min(1.0, max(-1.0, p.v)))
    ce = math.cos(el)
    if ce < 1e-15:
        return SphericalDirection(0.0, el)
    s = min(1.0, max(-1.0, p.u / ce))
    return SphericalDirection(math.asin(s), el)


def apply_rotation(q: UnitQuaternion, d: SphericalDirection) -> SphericalDirection:
    """Rotate a direction; the result may lie behind the array (see is_front)."""
    return SphericalDirection.from_unit_vector(q.rotate_vector(d.unit_vector()))
