"""Small 3-vector helpers on plain float tuples.

The tick loop runs at 100 Hz with a hard compute budget, so vectors are
(x, y, z) tuples and the math stays in C-speed float ops rather than
array objects. y is up; the ground plane is x/z.
"""

from __future__ import annotations

import math

Vec3 = tuple[float, float, float]
Vec2 = tuple[float, float]

ZERO3: Vec3 = (0.0, 0.0, 0.0)


def add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def norm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def normalize(a: Vec3) -> Vec3:
    n = norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def lerp(a: Vec3, b: Vec3, t: float) -> Vec3:
    return (
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    )


def is_finite(a: Vec3) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])


# -- ground-plane (x, z) helpers --------------------------------------------


def ground(a: Vec3) -> Vec2:
    """Project onto the ground plane, keeping (x, z)."""
    return (a[0], a[2])


def add2(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] + b[0], a[1] + b[1])


def sub2(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] - b[0], a[1] - b[1])


def scale2(a: Vec2, s: float) -> Vec2:
    return (a[0] * s, a[1] * s)


def dot2(a: Vec2, b: Vec2) -> float:
    return a[0] * b[0] + a[1] * b[1]


def norm2(a: Vec2) -> float:
    return math.hypot(a[0], a[1])


def normalize2(a: Vec2) -> Vec2:
    n = norm2(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return (a[0] / n, a[1] / n)


def rotate2(a: Vec2, angle_rad: float) -> Vec2:
    """Rotate in the ground plane. Positive angle turns +x toward +z."""
    c = math.cos(angle_rad)
    s = math.sin(angle_rad)
    return (c * a[0] - s * a[1], s * a[0] + c * a[1])


def angle_of2(a: Vec2) -> float:
    return math.atan2(a[1], a[0])


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi
