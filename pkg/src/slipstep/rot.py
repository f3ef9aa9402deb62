"""3x3 rotation matrices on row-major tuples of tuples.

Joint rotations compose per-axis in the order each joint's DOF list
declares (y, x, z for ball joints). Decomposition is the matching
Ry(a)*Rx(b)*Rz(c) factorization.
"""

from __future__ import annotations

import math

from .vec import Vec3

Mat3 = tuple[Vec3, Vec3, Vec3]

IDENTITY: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def mat_mul(a: Mat3, b: Mat3) -> Mat3:
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)) for i in range(3)
    )  # type: ignore[return-value]


def mat_vec(m: Mat3, v: Vec3) -> Vec3:
    return (
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    )


def transpose(m: Mat3) -> Mat3:
    return (
        (m[0][0], m[1][0], m[2][0]),
        (m[0][1], m[1][1], m[2][1]),
        (m[0][2], m[1][2], m[2][2]),
    )


def rot_x(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return ((1.0, 0.0, 0.0), (0.0, c, -s), (0.0, s, c))


def rot_y(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return ((c, 0.0, s), (0.0, 1.0, 0.0), (-s, 0.0, c))


def rot_z(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return ((c, -s, 0.0), (s, c, 0.0), (0.0, 0.0, 1.0))


def rot_axis(axis: str, a: float) -> Mat3:
    if axis == "x":
        return rot_x(a)
    if axis == "y":
        return rot_y(a)
    if axis == "z":
        return rot_z(a)
    raise ValueError(f"unknown axis '{axis}'")


def from_axis_angle(axis: Vec3, angle: float) -> Mat3:
    x, y, z = axis
    n = math.sqrt(x * x + y * y + z * z)
    if n < 1e-12:
        raise ValueError("axis must be nonzero")
    x, y, z = x / n, y / n, z / n
    c, s = math.cos(angle), math.sin(angle)
    t = 1.0 - c
    return (
        (t * x * x + c, t * x * y - s * z, t * x * z + s * y),
        (t * x * y + s * z, t * y * y + c, t * y * z - s * x),
        (t * x * z - s * y, t * y * z + s * x, t * z * z + c),
    )


def euler_yxz(y: float, x: float, z: float) -> Mat3:
    return mat_mul(rot_y(y), mat_mul(rot_x(x), rot_z(z)))


def decompose_yxz(m: Mat3) -> tuple[float, float, float]:
    """Angles (y, x, z) with euler_yxz(y, x, z) == m.

    Singular at x = +-90 deg; the joints using this order keep their x DOF
    well inside that range.
    """
    sx = -m[1][2]
    sx = min(1.0, max(-1.0, sx))
    x = math.asin(sx)
    if abs(sx) > 1.0 - 1e-9:
        # gimbal: only y-z combinations survive; fold everything into y
        y = math.atan2(m[0][1] * (1.0 if sx > 0 else -1.0), m[0][0])
        return (y, x, 0.0)
    y = math.atan2(m[0][2], m[2][2])
    z = math.atan2(m[1][0], m[1][1])
    return (y, x, z)


def mat_close(a: Mat3, b: Mat3, tol: float = 1e-9) -> bool:
    return all(abs(a[i][j] - b[i][j]) <= tol for i in range(3) for j in range(3))
