"""Uniform rotation sampling and constrained endpoint generation."""

from __future__ import annotations

import math

import numpy as np

from .rotations import UnitQuaternion, active_rotation

__all__ = ["random_rotation", "sample_endpoints", "rotation_angle_density"]


def random_rotation(rng: np.random.Generator) -> UnitQuaternion:
    """Draw a rotation uniformly over SO(3) (Shoemake's three-uniform method)."""
    u1, u2, u3 = rng.random(3)
    a = math.sqrt(1.0 - u1)
    b = math.sqrt(u1)
    return UnitQuaternion(
        b * math.cos(2.0 * math.pi * u3),
        a * math.sin(2.0 * math.pi * u2),
        a * math.cos(2.0 * math.pi * u2),
        b * math.sin(2.0 * math.pi * u3),
    )


def rotation_angle_density(angle: np.ndarray) -> np.ndarray:
    """Density of the rotation angle of a uniform rotation on [0, pi]."""
    angle = np.asarray(angle, dtype=float)
    return (1.0 - np.cos(angle)) / math.pi


def sample_endpoints(
    rng: np.random.Generator, min_deg: float, max_deg: float
) -> tuple[UnitQuaternion, UnitQuaternion]:
    """Uniform orientation pair whose relative rotation angle lies in a range.

    Plain rejection sampling: both marginals stay uniform over SO(3) given the
    constraint. Bounds are degrees with 0 <= min < max <= 180.
    """
    if not (0.0 <= min_deg < max_deg <= 180.0):
        raise ValueError("need 0 <= min_deg < max_deg <= 180")
    lo = math.radians(min_deg)
    hi = math.radians(max_deg)
    while True:
        q_start = random_rotation(rng)
        q_end = random_rotation(rng)
        angle = active_rotation(q_start, q_end).rotation_angle()
        if lo <= angle <= hi:
            return q_start, q_end
