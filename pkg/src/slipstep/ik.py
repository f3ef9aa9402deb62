"""Analytic IK onto the articulated skeleton, split lower/upper.

The lower solve places the pelvis at the model's COM and pins both feet
with an exact two-bone solution per leg; the upper solve is neutral unless
hand targets (box carrying) or a torso twist are requested. Swing feet
travel along a cubic Bezier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .rot import Mat3, mat_mul, mat_vec, rot_y, rot_z, transpose
from .rot import decompose_yxz
from .skeleton import Pose, Skeleton, clamp_to_limits, forward_kinematics
from .vec import Vec3, add, cross, dot, lerp, norm, scale, sub

REACH_FRACTION = 0.995  # keeps a hair of knee bend so the solve stays away from the straight-leg singularity


class ReachabilityError(Exception):
    def __init__(self, message: str, shortfall_m: float):
        super().__init__(message)
        self.shortfall_m = shortfall_m


@dataclass(frozen=True)
class FootTarget:
    position: Vec3  # sole contact point
    yaw_rad: float = 0.0


@dataclass(frozen=True)
class SwingTrajectory:
    start: Vec3
    end: Vec3
    apex_height_m: float
    duration_s: float
    p1: Vec3
    p2: Vec3


def make_swing(
    start: Vec3, end: Vec3, apex_height_m: float = 0.10, duration_s: float = 0.35
) -> SwingTrajectory:
    """Cubic Bezier lift: both interior controls sit apex_height_m above the
    higher endpoint, so the curve peaks at 3/4 of that above the chord."""
    if duration_s <= 0.0:
        raise ValueError("duration_s must be > 0")
    if apex_height_m < 0.0:
        raise ValueError("apex_height_m must be >= 0")
    top = max(start[1], end[1]) + apex_height_m
    a = lerp(start, end, 1.0 / 3.0)
    b = lerp(start, end, 2.0 / 3.0)
    return SwingTrajectory(
        start=start,
        end=end,
        apex_height_m=apex_height_m,
        duration_s=duration_s,
        p1=(a[0], top, a[2]),
        p2=(b[0], top, b[2]),
    )


def swing_position(traj: SwingTrajectory, phase: float) -> Vec3:
    if not 0.0 <= phase <= 1.0:
        raise ValueError(f"phase {phase} outside [0, 1]")
    u = 1.0 - phase
    c0 = u * u * u
    c1 = 3.0 * u * u * phase
    c2 = 3.0 * u * phase * phase
    c3 = phase * phase * phase
    return (
        c0 * traj.start[0] + c1 * traj.p1[0] + c2 * traj.p2[0] + c3 * traj.end[0],
        c0 * traj.start[1] + c1 * traj.p1[1] + c2 * traj.p2[1] + c3 * traj.end[1],
        c0 * traj.start[2] + c1 * traj.p1[2] + c2 * traj.p2[2] + c3 * traj.end[2],
    )


def _rotation_from_frames(t_hat: Vec3, n_hat: Vec3) -> Mat3:
    """Rotation mapping rest segment direction (0,-1,0) to t_hat and rest
    bend axis (0,0,1) to n_hat. Columns are images of the basis vectors."""
    c = cross(t_hat, n_hat)
    # rest: x = -(d0 x k0) image, y = -t, z = n
    col_x = (-c[0], -c[1], -c[2])
    col_y = (-t_hat[0], -t_hat[1], -t_hat[2])
    col_z = n_hat
    return (
        (col_x[0], col_y[0], col_z[0]),
        (col_x[1], col_y[1], col_z[1]),
        (col_x[2], col_y[2], col_z[2]),
    )


def _two_bone(
    delta: Vec3, l1: float, l2: float, bend_hint: Vec3, flex_sign: float
) -> tuple[Mat3, float]:
    """Solve a 2-segment chain spanning `delta` (parent-frame coordinates).

    Returns the first segment's rotation (parent frame) and the middle
    joint's signed flexion about its local z axis. flex_sign -1 bends the
    chain so the middle joint bulges toward bend_hint with a negative local
    angle (knees), +1 mirrors the frame so the stored angle is positive
    (elbows).
    """
    dist = norm(delta)
    if dist < 1e-9:
        raise ReachabilityError("two-bone target coincides with the joint", 0.0)
    d_hat = scale(delta, 1.0 / dist)
    span = min(dist, (l1 + l2) * REACH_FRACTION)
    cos_inner = (l1 * l1 + l2 * l2 - span * span) / (2.0 * l1 * l2)
    inner = math.acos(min(1.0, max(-1.0, cos_inner)))
    flex = math.pi - inner
    cos_alpha = (l1 * l1 + span * span - l2 * l2) / (2.0 * l1 * span)
    alpha = math.acos(min(1.0, max(-1.0, cos_alpha)))
    n = cross(d_hat, bend_hint)
    n_len = norm(n)
    if n_len < 1e-9:
        # target along the hint axis: any perpendicular bend plane works
        fallback = (0.0, 0.0, 1.0) if abs(d_hat[2]) < 0.9 else (0.0, 1.0, 0.0)
        n = cross(d_hat, fallback)
        n_len = norm(n)
    n_hat = scale(n, 1.0 / n_len)
    # rotate d_hat toward the hint by alpha: first segment direction
    nxd = cross(n_hat, d_hat)
    ca, sa = math.cos(alpha), math.sin(alpha)
    t_hat = (
        d_hat[0] * ca + nxd[0] * sa,
        d_hat[1] * ca + nxd[1] * sa,
        d_hat[2] * ca + nxd[2] * sa,
    )
    axis = n_hat if flex_sign < 0 else (-n_hat[0], -n_hat[1], -n_hat[2])
    return _rotation_from_frames(t_hat, axis), flex_sign * flex


def leg_reach_m(skeleton: Skeleton, side: str) -> float:
    return skeleton.segment_length(f"knee_{side}") + skeleton.segment_length(f"ankle_{side}")


def ankle_height_m(skeleton: Skeleton, side: str) -> float:
    return -skeleton.joint(f"toe_{side}").offset[1]


def solve_lower_ik(
    skeleton: Skeleton,
    com_target: Vec3,
    foot_targets: tuple[FootTarget, FootTarget],
    pelvis_yaw_rad: float = 0.0,
) -> Pose:
    """Exact leg solve: pelvis at com_target (lowered only if a foot would
    fall out of reach), both soles exactly on their targets, knees forward.

    Raises ReachabilityError when no pelvis height can reach a target.
    Limits are clamped afterward; targets inside the working envelope never
    trigger the clamp.
    """
    root_r = rot_y(pelvis_yaw_rad)
    root_rt = transpose(root_r)

    pelvis_y = com_target[1]
    ankles: list[Vec3] = []
    for side, target in zip(("l", "r"), foot_targets):
        ankle = add(target.position, (0.0, ankle_height_m(skeleton, side), 0.0))
        ankles.append(ankle)
        hip_off = mat_vec(root_r, skeleton.joint(f"hip_{side}").offset)
        hip_xz = (com_target[0] + hip_off[0], com_target[2] + hip_off[2])
        max_len = leg_reach_m(skeleton, side) * REACH_FRACTION
        horiz = math.hypot(ankle[0] - hip_xz[0], ankle[2] - hip_xz[1])
        if horiz > max_len:
            raise ReachabilityError(
                f"foot target {target.position} beyond leg reach", horiz - max_len
            )
        ceiling = ankle[1] + math.sqrt(max_len * max_len - horiz * horiz)
        pelvis_y = min(pelvis_y, ceiling)

    pelvis = (com_target[0], pelvis_y, com_target[2])
    angles = [0.0] * skeleton.internal_dof_count

    for side, target, ankle in zip(("l", "r"), foot_targets, ankles):
        hip_joint = skeleton.joint(f"hip_{side}")
        hip_world = add(pelvis, mat_vec(root_r, hip_joint.offset))
        delta_root = mat_vec(root_rt, sub(ankle, hip_world))
        l1 = skeleton.segment_length(f"knee_{side}")
        l2 = skeleton.segment_length(f"ankle_{side}")
        hip_r_local, knee_angle = _two_bone(delta_root, l1, l2, (1.0, 0.0, 0.0), -1.0)
        hy, hx, hz = decompose_yxz(hip_r_local)
        knee_r_world = mat_mul(root_r, mat_mul(hip_r_local, rot_z(knee_angle)))
        ankle_r_local = mat_mul(transpose(knee_r_world), rot_y(target.yaw_rad))
        ay, ax, az = decompose_yxz(ankle_r_local)
        angles[skeleton.dof_slot(f"hip_{side}", "y")] = hy
        angles[skeleton.dof_slot(f"hip_{side}", "x")] = hx
        angles[skeleton.dof_slot(f"hip_{side}", "z")] = hz
        angles[skeleton.dof_slot(f"knee_{side}", "z")] = knee_angle
        angles[skeleton.dof_slot(f"ankle_{side}", "y")] = ay
        angles[skeleton.dof_slot(f"ankle_{side}", "x")] = ax
        angles[skeleton.dof_slot(f"ankle_{side}", "z")] = az

    clamped, _ = clamp_to_limits(skeleton, tuple(angles))
    return Pose(root_position=pelvis, root_rotation=(pelvis_yaw_rad, 0.0, 0.0), angles=clamped)


def solve_upper_ik(
    skeleton: Skeleton,
    pose: Pose,
    torso_yaw_rad: float | None = None,
    hand_targets: tuple[Vec3 | None, Vec3 | None] = (None, None),
) -> Pose:
    """Fill the upper body: neutral spine (optionally twisted toward
    torso_yaw_rad), two-bone arm solves for any hand targets.

    Lower-body angles are never touched.
    """
    angles = list(pose.angles)

    if torso_yaw_rad is not None:
        from .vec import wrap_angle

        delta = wrap_angle(torso_yaw_rad - pose.root_rotation[0])
        s1 = skeleton.joint("spine1").dofs[0]
        s2 = skeleton.joint("spine2").dofs[0]
        first = s1.clamp(delta / 2.0)
        angles[skeleton.dof_slot("spine1", "y")] = first
        angles[skeleton.dof_slot("spine2", "y")] = s2.clamp(delta - first)

    probe = Pose(pose.root_position, pose.root_rotation, tuple(angles))
    fk = forward_kinematics(skeleton, probe)

    for side, target in zip(("l", "r"), hand_targets):
        if target is None:
            continue
        parent_r, _ = fk["spine2"]
        _, shoulder_pos = fk[f"shoulder_{side}"]
        l1 = skeleton.segment_length(f"elbow_{side}")
        l2 = skeleton.segment_length(f"hand_{side}")
        delta_parent = mat_vec(transpose(parent_r), sub(target, shoulder_pos))
        dist = norm(delta_parent)
        max_len = (l1 + l2) * REACH_FRACTION
        if dist > max_len:
            raise ReachabilityError(f"hand target {target} beyond arm reach", dist - max_len)
        shoulder_r_local, elbow_angle = _two_bone(
            delta_parent, l1, l2, (-1.0, 0.0, 0.0), +1.0
        )
        sy, sx, sz = decompose_yxz(shoulder_r_local)
        angles[skeleton.dof_slot(f"shoulder_{side}", "y")] = sy
        angles[skeleton.dof_slot(f"shoulder_{side}", "x")] = sx
        angles[skeleton.dof_slot(f"shoulder_{side}", "z")] = sz
        angles[skeleton.dof_slot(f"elbow_{side}", "z")] = elbow_angle

    clamped, _ = clamp_to_limits(skeleton, tuple(angles))
    return replace(pose, angles=clamped)


def foot_world_position(skeleton: Skeleton, pose: Pose, side: str) -> Vec3:
    """Sole contact point under the ankle for the solved pose."""
    fk = forward_kinematics(skeleton, pose)
    _, ankle = fk[f"ankle_{side}"]
    return (ankle[0], ankle[1] - ankle_height_m(skeleton, side), ankle[2])
