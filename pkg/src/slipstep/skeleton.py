"""Articulated character model: 30 internal DOF on a 6-DOF root.

The hierarchy, offsets, limits and segment masses live in
data/skeleton.yaml; see the comments there for conventions. Forward
kinematics and the COM queries here are pure; Skeleton itself is immutable
after load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import yaml

from .rot import IDENTITY, Mat3, euler_yxz, mat_mul, mat_vec, rot_axis
from .vec import Vec3, add, cross, dot, sub

ROOT_DOF_COUNT = 6


@dataclass(frozen=True)
class Dof:
    axis: str
    min_rad: float
    max_rad: float

    def clamp(self, angle: float) -> float:
        return min(self.max_rad, max(self.min_rad, angle))


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str | None
    offset: Vec3
    mass_kg: float
    com_offset: Vec3
    dofs: tuple[Dof, ...]


@dataclass(frozen=True)
class Skeleton:
    joints: tuple[Joint, ...]
    height_m: float
    total_mass_kg: float

    def __post_init__(self) -> None:
        index = {j.name: i for i, j in enumerate(self.joints)}
        object.__setattr__(self, "_index", index)
        layout: list[tuple[str, str]] = []
        for j in self.joints:
            for d in j.dofs:
                layout.append((j.name, d.axis))
        object.__setattr__(self, "_dof_layout", tuple(layout))
        object.__setattr__(
            self, "_dof_index", {pair: i for i, pair in enumerate(layout)}
        )

    @property
    def dof_layout(self) -> tuple[tuple[str, str], ...]:
        return self._dof_layout  # type: ignore[attr-defined]

    @property
    def internal_dof_count(self) -> int:
        return len(self.dof_layout)

    @property
    def total_dof_count(self) -> int:
        return self.internal_dof_count + ROOT_DOF_COUNT

    def joint(self, name: str) -> Joint:
        return self.joints[self._index[name]]  # type: ignore[attr-defined]

    def has_joint(self, name: str) -> bool:
        return name in self._index  # type: ignore[attr-defined]

    def dof_slot(self, joint_name: str, axis: str) -> int:
        return self._dof_index[(joint_name, axis)]  # type: ignore[attr-defined]

    def segment_length(self, child_name: str) -> float:
        off = self.joint(child_name).offset
        return math.sqrt(off[0] ** 2 + off[1] ** 2 + off[2] ** 2)


@dataclass(frozen=True)
class Pose:
    """Root transform plus one angle per internal DOF (skeleton layout order)."""

    root_position: Vec3
    root_rotation: tuple[float, float, float]  # (y, x, z) rad
    angles: tuple[float, ...]

    def angle(self, skeleton: Skeleton, joint_name: str, axis: str) -> float:
        return self.angles[skeleton.dof_slot(joint_name, axis)]


def load_skeleton(path: str | None = None) -> Skeleton:
    """Load and validate the skeleton description (default: packaged file)."""
    if path is None:
        text = resources.files("slipstep").joinpath("data/skeleton.yaml").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = yaml.safe_load(text)
    joints: list[Joint] = []
    seen: set[str] = set()
    for item in raw["joints"]:
        name = item["name"]
        if name in seen:
            raise ValueError(f"duplicate joint '{name}'")
        parent = item["parent"]
        if parent is not None and parent not in seen:
            raise ValueError(f"joint '{name}' listed before its parent '{parent}'")
        seen.add(name)
        dofs = []
        for d in item.get("dofs", ()):
            if d["axis"] not in ("x", "y", "z"):
                raise ValueError(f"joint '{name}': bad axis '{d['axis']}'")
            lo = math.radians(float(d["min_deg"]))
            hi = math.radians(float(d["max_deg"]))
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"joint '{name}': bad limits")
            dofs.append(Dof(axis=d["axis"], min_rad=lo, max_rad=hi))
        joints.append(
            Joint(
                name=name,
                parent=parent,
                offset=tuple(float(v) for v in item["offset"]),  # type: ignore[arg-type]
                mass_kg=float(item["mass_kg"]),
                com_offset=tuple(float(v) for v in item["com_offset"]),  # type: ignore[arg-type]
                dofs=tuple(dofs),
            )
        )
    roots = [j for j in joints if j.parent is None]
    if len(roots) != 1:
        raise ValueError(f"expected exactly one root joint, got {len(roots)}")
    skel = Skeleton(
        joints=tuple(joints),
        height_m=float(raw["height_m"]),
        total_mass_kg=float(raw["total_mass_kg"]),
    )
    mass = sum(j.mass_kg for j in joints)
    if abs(mass - skel.total_mass_kg) > 1e-6:
        raise ValueError(f"segment masses sum to {mass}, expected {skel.total_mass_kg}")
    return skel


def neutral_pose(skeleton: Skeleton, root_position: Vec3 = (0.0, 0.96, 0.0)) -> Pose:
    return Pose(
        root_position=root_position,
        root_rotation=(0.0, 0.0, 0.0),
        angles=tuple(0.0 for _ in skeleton.dof_layout),
    )


def clamp_to_limits(skeleton: Skeleton, angles: tuple[float, ...]) -> tuple[tuple[float, ...], bool]:
    """Angles clamped into their configured intervals, plus a changed flag."""
    out = list(angles)
    changed = False
    i = 0
    for joint in skeleton.joints:
        for dof in joint.dofs:
            c = dof.clamp(out[i])
            if c != out[i]:
                out[i] = c
                changed = True
            i += 1
    return tuple(out), changed


def forward_kinematics(skeleton: Skeleton, pose: Pose) -> dict[str, tuple[Mat3, Vec3]]:
    """World (rotation, position) per joint."""
    if len(pose.angles) != skeleton.internal_dof_count:
        raise ValueError(
            f"pose has {len(pose.angles)} angles, skeleton expects {skeleton.internal_dof_count}"
        )
    world: dict[str, tuple[Mat3, Vec3]] = {}
    slot = 0
    for joint in skeleton.joints:
        if joint.parent is None:
            parent_r: Mat3 = euler_yxz(*pose.root_rotation)
            parent_p = pose.root_position
        else:
            parent_r, parent_p = world[joint.parent]
        p = add(parent_p, mat_vec(parent_r, joint.offset))
        r = parent_r
        for dof in joint.dofs:
            r = mat_mul(r, rot_axis(dof.axis, pose.angles[slot]))
            slot += 1
        world[joint.name] = (r, p)
    return world


def joint_positions(skeleton: Skeleton, pose: Pose) -> dict[str, Vec3]:
    return {name: p for name, (_, p) in forward_kinematics(skeleton, pose).items()}


def com_estimate(pose: Pose, skeleton: Skeleton) -> Vec3:
    """Hip-midpoint COM stand-in used by the whole control stack."""
    fk = forward_kinematics(skeleton, pose)
    _, hl = fk["hip_l"]
    _, hr = fk["hip_r"]
    return ((hl[0] + hr[0]) / 2.0, (hl[1] + hr[1]) / 2.0, (hl[2] + hr[2]) / 2.0)


def mass_weighted_com(pose: Pose, skeleton: Skeleton) -> Vec3:
    """Brute-force segment-mass COM, the reference the hip midpoint stands in for."""
    fk = forward_kinematics(skeleton, pose)
    sx = sy = sz = 0.0
    for joint in skeleton.joints:
        if joint.mass_kg == 0.0:
            continue
        r, p = fk[joint.name]
        c = add(p, mat_vec(r, joint.com_offset))
        sx += joint.mass_kg * c[0]
        sy += joint.mass_kg * c[1]
        sz += joint.mass_kg * c[2]
    m = skeleton.total_mass_kg
    return (sx / m, sy / m, sz / m)


def subtree_joints(skeleton: Skeleton, joint_name: str) -> list[str]:
    children: dict[str, list[str]] = {j.name: [] for j in skeleton.joints}
    for j in skeleton.joints:
        if j.parent is not None:
            children[j.parent].append(j.name)
    out: list[str] = []
    stack = [joint_name]
    while stack:
        name = stack.pop()
        out.append(name)
        stack.extend(children[name])
    return out


def subtree_inertia(
    skeleton: Skeleton,
    fk: dict[str, tuple[Mat3, Vec3]],
    joint_name: str,
    axis_world: Vec3,
) -> float:
    """Point-mass inertia of the joint's subtree about its world axis line."""
    n = math.sqrt(dot(axis_world, axis_world))
    if n < 1e-12:
        raise ValueError("axis must be nonzero")
    axis = (axis_world[0] / n, axis_world[1] / n, axis_world[2] / n)
    _, origin = fk[joint_name]
    total = 0.0
    for name in subtree_joints(skeleton, joint_name):
        joint = skeleton.joint(name)
        if joint.mass_kg == 0.0:
            continue
        r, p = fk[name]
        c = add(p, mat_vec(r, joint.com_offset))
        rel = sub(c, origin)
        perp = cross(axis, rel)
        total += joint.mass_kg * dot(perp, perp)
    return total
