"""Joint-space PD torque audit.

The torque law is tau = -(kp * (theta - theta_d) + kd * (thetadot -
thetadot_d)), clamped to a symmetric limit. Sign convention: positive tau
accelerates the angle in the positive direction, so the applied torque is
the negation of the raw error form. Gains may be rescaled by the ratio of
the joint's current subtree inertia to its rest-pose value, which keeps
tracking stiffness roughly configuration-independent; the clamp limit is
never rescaled.

The full character is driven kinematically; these torques are an audit
channel recorded alongside the motion, not a force actually integrated.
Single-joint forward dynamics lives here only to validate the law against
closed-form oscillator behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Mapping, Sequence

import yaml

from .skeleton import Pose, Skeleton, forward_kinematics, neutral_pose, subtree_inertia

__all__ = [
    "PdDomainError",
    "PoseMismatchError",
    "PdGains",
    "JointState",
    "GainTable",
    "TorqueReport",
    "SingleJointTrace",
    "load_gains",
    "joint_torque",
    "inertia_scale",
    "track_pose",
    "reference_inertias",
    "largest_joints",
    "simulate_single_joint",
]

DEFAULT_TORQUE_LIMIT_NM = 500.0


class PdDomainError(ValueError):
    """Raised for non-positive gains, limits, or inertias."""


class PoseMismatchError(ValueError):
    """Raised when poses or velocity vectors disagree with the skeleton."""


@dataclass(frozen=True)
class PdGains:
    kp_nm_per_rad: float
    kd_nms_per_rad: float
    torque_limit_nm: float = DEFAULT_TORQUE_LIMIT_NM

    def __post_init__(self) -> None:
        if not (self.kp_nm_per_rad > 0.0):
            raise PdDomainError(f"kp must be positive, got {self.kp_nm_per_rad}")
        if self.kd_nms_per_rad < 0.0:
            raise PdDomainError(f"kd must be non-negative, got {self.kd_nms_per_rad}")
        if not (self.torque_limit_nm > 0.0):
            raise PdDomainError(f"torque limit must be positive, got {self.torque_limit_nm}")


@dataclass(frozen=True)
class JointState:
    angle_rad: float = 0.0
    velocity_rps: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.angle_rad) and math.isfinite(self.velocity_rps)):
            raise PdDomainError("joint state must be finite")


@dataclass(frozen=True)
class GainTable:
    """Per-joint gains keyed by joint name, sharing one torque limit."""

    joints: Mapping[str, PdGains]
    torque_limit_nm: float = DEFAULT_TORQUE_LIMIT_NM

    def for_joint(self, name: str) -> PdGains:
        try:
            return self.joints[name]
        except KeyError:
            raise KeyError(f"no PD gains configured for joint {name!r}") from None


def load_gains(path: str | None = None) -> GainTable:
    """Load the per-joint gain file (the packaged defaults when path is None)."""
    if path is None:
        text = resources.files("slipstep").joinpath("data/pd_gains.yaml").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    raw = yaml.safe_load(text)
    limit = float(raw.get("torque_limit_nm", DEFAULT_TORQUE_LIMIT_NM))
    joints = {
        name: PdGains(float(entry["kp"]), float(entry["kd"]), limit)
        for name, entry in raw["joints"].items()
    }
    return GainTable(joints=joints, torque_limit_nm=limit)


def joint_torque(current: JointState, desired: JointState, gains: PdGains) -> float:
    err = current.angle_rad - desired.angle_rad
    derr = current.velocity_rps - desired.velocity_rps
    tau = -(gains.kp_nm_per_rad * err + gains.kd_nms_per_rad * derr)
    limit = gains.torque_limit_nm
    if tau > limit:
        return limit
    if tau < -limit:
        return -limit
    return tau


def inertia_scale(gains: PdGains, inertia_kgm2: float, reference_kgm2: float) -> PdGains:
    """Scale both gains by inertia/reference. The clamp limit is untouched."""
    if not (inertia_kgm2 > 0.0) or not (reference_kgm2 > 0.0):
        raise PdDomainError("inertia and reference must be positive")
    ratio = inertia_kgm2 / reference_kgm2
    return PdGains(
        gains.kp_nm_per_rad * ratio,
        gains.kd_nms_per_rad * ratio,
        gains.torque_limit_nm,
    )


@dataclass(frozen=True)
class TorqueReport:
    """Per-DOF torques in skeleton layout order, with trace summary stats."""

    torques_nm: tuple[float, ...]
    max_abs_nm: float
    mean_abs_nm: float


def track_pose(
    skeleton: Skeleton,
    current: Pose,
    current_velocities: Sequence[float],
    desired: Pose,
    desired_velocities: Sequence[float],
    table: GainTable,
    inertia_ratio_by_joint: Mapping[str, float] | None = None,
) -> TorqueReport:
    """PD torque for every internal DOF, iterated in fixed layout order."""
    n = skeleton.internal_dof_count
    if len(current.angles) != n or len(desired.angles) != n:
        raise PoseMismatchError(
            f"pose has {len(current.angles)}/{len(desired.angles)} angles, skeleton expects {n}"
        )
    if len(current_velocities) != n or len(desired_velocities) != n:
        raise PoseMismatchError(
            f"velocity vectors must have {n} entries, got "
            f"{len(current_velocities)}/{len(desired_velocities)}"
        )
    torques: list[float] = []
    total_abs = 0.0
    max_abs = 0.0
    for slot, (joint_name, _axis) in enumerate(skeleton.dof_layout):
        gains = table.for_joint(joint_name)
        if inertia_ratio_by_joint is not None:
            ratio = inertia_ratio_by_joint.get(joint_name)
            if ratio is not None:
                gains = PdGains(
                    gains.kp_nm_per_rad * ratio,
                    gains.kd_nms_per_rad * ratio,
                    gains.torque_limit_nm,
                )
        tau = joint_torque(
            JointState(current.angles[slot], float(current_velocities[slot])),
            JointState(desired.angles[slot], float(desired_velocities[slot])),
            gains,
        )
        torques.append(tau)
        a = abs(tau)
        total_abs += a
        if a > max_abs:
            max_abs = a
    mean_abs = total_abs / n if n else 0.0
    return TorqueReport(tuple(torques), max_abs, mean_abs)


def _swing_axis_world(skeleton: Skeleton, fk, joint_name: str):
    """World direction of the joint's sagittal swing axis (its last DOF)."""
    joint = skeleton.joint(joint_name)
    axis_name = joint.dofs[-1].axis
    rot = fk[joint_name][0]
    local = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}[axis_name]
    return (
        rot[0][0] * local[0] + rot[0][1] * local[1] + rot[0][2] * local[2],
        rot[1][0] * local[0] + rot[1][1] * local[1] + rot[1][2] * local[2],
        rot[2][0] * local[0] + rot[2][1] * local[1] + rot[2][2] * local[2],
    )


def reference_inertias(skeleton: Skeleton) -> dict[str, float]:
    """Rest-pose subtree inertia per actuated joint, about its swing axis."""
    pose = neutral_pose(skeleton, (0.0, 0.0, 0.0))
    fk = forward_kinematics(skeleton, pose)
    out: dict[str, float] = {}
    for joint in skeleton.joints:
        if not joint.dofs:
            continue
        axis = _swing_axis_world(skeleton, fk, joint.name)
        inertia = subtree_inertia(skeleton, fk, joint.name, axis)
        # leaf-heavy chains can be nearly axial; keep the reference sane
        out[joint.name] = max(inertia, 1e-6)
    return out


def largest_joints(skeleton: Skeleton, count: int = 3) -> tuple[str, ...]:
    """Joint names with the largest rest-pose inertia, for per-tick rescaling.

    Only these get their inertia recomputed every tick; the rest keep the
    rest-pose ratio of 1. Cheap and covers the joints where configuration
    actually moves the number.
    """
    ref = reference_inertias(skeleton)
    ranked = sorted(ref.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(name for name, _ in ranked[:count])


def current_inertia_ratios(
    skeleton: Skeleton,
    pose: Pose,
    joint_names: Sequence[str],
    reference: Mapping[str, float],
) -> dict[str, float]:
    """Inertia ratio I/I_ref for the named joints in the given pose."""
    fk = forward_kinematics(skeleton, pose)
    out: dict[str, float] = {}
    for name in joint_names:
        axis = _swing_axis_world(skeleton, fk, name)
        inertia = max(subtree_inertia(skeleton, fk, name, axis), 1e-6)
        out[name] = inertia / reference[name]
    return out


@dataclass(frozen=True)
class SingleJointTrace:
    times_s: tuple[float, ...]
    angles_rad: tuple[float, ...]
    velocities_rps: tuple[float, ...]
    torques_nm: tuple[float, ...]


def simulate_single_joint(
    gains: PdGains,
    inertia_kgm2: float,
    desired: JointState,
    dt_s: float,
    duration_s: float,
    initial: JointState = JointState(),
    external_torque: Callable[[JointState, float], float] | None = None,
) -> SingleJointTrace:
    """Semi-implicit Euler on one hinge: I * acc = pd torque + external.

    The validation rig for the torque law; the external term models gravity
    or any other load as a function of state and time.
    """
    if not (inertia_kgm2 > 0.0):
        raise PdDomainError("inertia must be positive")
    if not (dt_s > 0.0):
        raise PdDomainError("dt must be positive")
    steps = int(round(duration_s / dt_s))
    state = initial
    times = [0.0]
    angles = [state.angle_rad]
    velocities = [state.velocity_rps]
    torques = [joint_torque(state, desired, gains)]
    for i in range(steps):
        tau = joint_torque(state, desired, gains)
        total = tau if external_torque is None else tau + external_torque(state, i * dt_s)
        acc = total / inertia_kgm2
        vel = state.velocity_rps + acc * dt_s
        ang = state.angle_rad + vel * dt_s
        state = JointState(ang, vel)
        times.append((i + 1) * dt_s)
        angles.append(ang)
        velocities.append(vel)
        torques.append(joint_torque(state, desired, gains))
    return SingleJointTrace(tuple(times), tuple(angles), tuple(velocities), tuple(torques))
