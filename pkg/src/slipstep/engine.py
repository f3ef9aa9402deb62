"""The tick loop: disturbances, balance decisions, dynamics, swings, IK, audit.

One SteppingEngine owns one character. The scenario harness and the live
service both drive this class and nothing else, so a recorded command tape
replays bit-identically through either path. All state advances in step();
commands and scheduled events mutate the engine only at tick boundaries.

Trace records are plain dicts with a fixed key order so serialized traces
are byte-stable across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .balance import (
    BalanceMode,
    ControllerConfig,
    GaitContext,
    adjust_rest_lengths,
    ankle_force_bound_n,
    build_support_region,
    classify_com,
    decide,
    left_of,
    plan_corrective_step,
    plan_gait_step,
)
from .ik import (
    FootTarget,
    ReachabilityError,
    leg_reach_m,
    make_swing,
    solve_lower_ik,
    solve_upper_ik,
    swing_position,
)
from .pd import (
    current_inertia_ratios,
    largest_joints,
    load_gains,
    reference_inertias,
    track_pose,
)
from .scenario import (
    BallDisturbance,
    PushDisturbance,
    Scenario,
    ScheduleEntry,
    SetBoxMass,
    SetLegScale,
    SetTarget,
    _entry_from_dict,
    _entry_to_dict,
    ball_to_impulse,
    scenario_from_dict,
    scenario_to_dict,
)
from .skeleton import Pose, forward_kinematics, load_skeleton
from .slip import (
    LegRecord,
    PullContext,
    SlipParams,
    SlipState,
    StepPlan,
    exchange_support,
    integrate,
    total_energy,
)
from .terrain import Terrain, height_at, terrain_from_config, terrain_to_config
from .vec import (
    Vec2,
    Vec3,
    add2,
    angle_of2,
    dot2,
    ground,
    norm,
    norm2,
    normalize2,
    scale2,
    sub2,
    wrap_angle,
)

DT_S = 0.01
TRACE_SCHEMA_VERSION = 1
SNAPSHOT_SCHEMA_VERSION = 1
SWING_APEX_M = 0.10
TRAIL_SWING_S = 0.30
PELVIS_TURN_RATE_RPS = 1.5
# exchange spawns the new spring at whatever length the COM-to-anchor
# distance happens to be; landing much shorter than rest stores a large
# recoil that throws the mass backward, so swings cut short before that
PLANT_DEPTH_FRACTION = 0.92
# a cut swing still needs time for the foot to physically travel
SWING_CUT_MIN_PHASE = 0.25
HAND_BOX_AHEAD_M = 0.35
HAND_BOX_HALF_GAP_M = 0.15


class EngineStopped(RuntimeError):
    """step() after the character has fallen."""


@dataclass
class _ActivePush:
    start_s: float
    end_s: float
    force_n: Vec3


@dataclass
class _ActiveSwing:
    leg: int
    plan: StepPlan | None  # None for a trail plant back to double support
    start_s: float
    duration_s: float
    start: Vec3
    trajectory: object
    target: Vec3
    target_yaw_rad: float
    predicted_plant_m: float = math.inf  # leg length at predicted touchdown


def _equilibrium_com_y(
    params: SlipParams,
    anchors: tuple[Vec3, Vec3],
    rests: tuple[float, float],
    com_xz: Vec2,
) -> float:
    """COM height (over com_xz) where both springs carry the weight exactly."""

    def lift(y: float) -> float:
        total = 0.0
        for (ax, ay, az), rest in zip(anchors, rests):
            dx = com_xz[0] - ax
            dy = y - ay
            dz = com_xz[1] - az
            length = math.sqrt(dx * dx + dy * dy + dz * dz)
            total += params.spring_k * (rest - length) * (dy / length)
        return total

    lo = max(a[1] for a in anchors) + 0.3 * params.rest_length_m
    hi = max(a[1] for a in anchors) + params.rest_length_m
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if lift(mid) > params.weight_n:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class SteppingEngine:
    def __init__(self, scenario: Scenario, skeleton=None):
        self.scenario = scenario
        self.terrain: Terrain = scenario.terrain
        self.config: ControllerConfig = scenario.controller
        self.base_params: SlipParams = scenario.slip
        self.params: SlipParams = scenario.slip
        self.box_mass_kg = 0.0
        self.leg_scale = 1.0
        self.skeleton = skeleton if skeleton is not None else load_skeleton()
        self.gains = load_gains()
        self.ref_inertias = reference_inertias(self.skeleton)
        self.rescaled_joints = largest_joints(self.skeleton)
        self.gait = GaitContext()
        self.tick = 0
        self.fallen = False
        self.swing: _ActiveSwing | None = None
        self.pushes: list[_ActivePush] = []
        self._pending: list[ScheduleEntry] = sorted(
            scenario.schedule, key=lambda e: e.time_s
        )
        self.events: list[dict] = []

        heading = angle_of2(self.config.target_direction)
        self.pelvis_yaw = heading
        lat = left_of(self.config.target_direction)
        w = self.config.stance_half_width_m
        feet_xz = [scale2(lat, w), scale2(lat, -w)]
        heights = []
        for fx, fz in feet_xz:
            h = height_at(self.terrain, fx, fz, 0.0)
            heights.append(0.0 if h is None else h)
        rest = adjust_rest_lengths((heights[0], heights[1]), self.params.rest_length_m)
        anchors = (
            (feet_xz[0][0], heights[0], feet_xz[0][1]),
            (feet_xz[1][0], heights[1], feet_xz[1][1]),
        )
        com_y = _equilibrium_com_y(self.params, anchors, rest, (0.0, 0.0))
        legs = (
            LegRecord(anchors[0], rest[0], True),
            LegRecord(anchors[1], rest[1], True),
        )
        self.state = SlipState(
            com_position=(0.0, com_y, 0.0),
            com_velocity=(0.0, 0.0, 0.0),
            legs=legs,
            sim_time_s=0.0,
        )
        self.foot_yaws = [heading, heading]
        self.pose: Pose = self._solve_pose((None, None))
        self._pose_prev = self.pose
        self._vel_prev = (0.0,) * self.skeleton.internal_dof_count

    # ------------------------------------------------------------- commands

    def queue_push(self, force_n: Vec3, duration_s: float, start_s: float | None = None):
        t0 = self.time_s if start_s is None else start_s
        self.pushes.append(_ActivePush(t0, t0 + duration_s, force_n))

    def set_target(self, speed_mps: float, direction: Vec2 | None = None):
        kwargs = {"target_speed_mps": speed_mps}
        if direction is not None:
            kwargs["target_direction"] = normalize2(direction)
        self.config = replace(self.config, **kwargs)

    def set_direction(self, yaw_rad: float):
        self.config = replace(
            self.config, target_direction=(math.cos(yaw_rad), math.sin(yaw_rad))
        )

    def set_box_mass(self, mass_kg: float):
        self.box_mass_kg = mass_kg
        self._refresh_params()

    def set_leg_scale(self, factor: float):
        self.leg_scale = factor
        self._refresh_params()

    def set_terrain(self, terrain: Terrain):
        self.terrain = terrain

    def _refresh_params(self):
        self.params = replace(
            self.base_params,
            mass_kg=self.base_params.mass_kg + self.box_mass_kg,
            rest_length_m=self.base_params.rest_length_m * self.leg_scale,
        )

    def apply_entry(self, entry: ScheduleEntry):
        """Apply one schedule entry now (at the current tick boundary)."""
        if isinstance(entry, PushDisturbance):
            self.queue_push(entry.force_n, entry.duration_s, start_s=entry.time_s)
        elif isinstance(entry, BallDisturbance):
            hit = ball_to_impulse(entry, self.state.com_position)
            if hit is not None:
                self.queue_push(hit.force_n, hit.duration_s, start_s=hit.time_s)
        elif isinstance(entry, SetTarget):
            self.set_target(entry.speed_mps, entry.direction)
        elif isinstance(entry, SetBoxMass):
            self.set_box_mass(entry.mass_kg)
        elif isinstance(entry, SetLegScale):
            self.set_leg_scale(entry.factor)
        else:
            raise TypeError(f"unknown schedule entry {entry!r}")

    # ----------------------------------------------------------------- tick

    @property
    def time_s(self) -> float:
        return self.tick * DT_S

    def _external_force(self, t: float) -> Vec3:
        fx = fy = fz = 0.0
        keep = []
        for p in self.pushes:
            if t >= p.end_s - 1e-12:
                continue
            keep.append(p)
            if t >= p.start_s - 1e-12:
                fx += p.force_n[0]
                fy += p.force_n[1]
                fz += p.force_n[2]
        self.pushes = keep
        return (fx, fy, fz)

    def _pull_context(self, force: Vec3) -> PullContext:
        stance = self.state.stance_indices()
        anchor = self.state.legs[stance[0]].foot_anchor if stance else (0.0, 0.0, 0.0)
        axis = (
            self.state.com_position[0] - anchor[0],
            self.state.com_position[1] - anchor[1],
            self.state.com_position[2] - anchor[2],
        )
        n = norm(axis)
        axis = (axis[0] / n, axis[1] / n, axis[2] / n) if n > 1e-9 else (0.0, 1.0, 0.0)
        v_h = ground(self.state.com_velocity)
        if norm2(v_h) > 0.05:
            d2 = normalize2(v_h)
        else:
            d2 = self.config.target_direction
        return PullContext(
            external_force_n=force,
            gravity_force_n=(0.0, -self.params.weight_n, 0.0),
            leg_axis_unit=axis,
            force_axis_unit=(d2[0], 0.0, d2[1]),
        )

    def _ride_terrain(self):
        """Stance anchors follow the surface height (moving platforms)."""
        t = self.state.sim_time_s
        for leg in self.state.legs:
            if not leg.is_stance:
                continue
            h = height_at(self.terrain, leg.foot_anchor[0], leg.foot_anchor[2], t)
            if h is not None and abs(h - leg.foot_anchor[1]) > 1e-12:
                leg.foot_anchor = (leg.foot_anchor[0], h, leg.foot_anchor[2])

    def _start_swing(self, plan: StepPlan, now: float, trail: bool = False):
        leg = plan.swing_leg_index
        start = self.state.legs[leg].foot_anchor
        duration = TRAIL_SWING_S if trail else self.config.swing_duration_s
        traj = make_swing(start, plan.target_foot_position, SWING_APEX_M, duration)
        self.state.legs[leg].is_stance = False
        self.swing = _ActiveSwing(
            leg=leg,
            plan=None if trail else plan,
            start_s=now,
            duration_s=duration,
            start=start,
            trajectory=traj,
            target=plan.target_foot_position,
            target_yaw_rad=plan.target_yaw_rad,
        )

    def _predict_touchdown(self, t: float, force: Vec3) -> SlipState:
        """Roll the stance dynamics forward to the end of the active swing.

        Single-support motion does not depend on where the swing foot will
        land, so this is the exact touchdown state (up to disturbances that
        start mid-swing, which the next retarget folds in). The swing-phase
        ankle servo is replayed tick by tick, same rule the loop applies.
        """
        remaining = int(round((self.swing.start_s + self.swing.duration_s - t) / DT_S))
        walking = self.config.target_speed_mps > 0.0
        state = self.state
        for _ in range(max(remaining, 0)):
            ankle = self._swing_ankle(state) if walking else (0.0, 0.0, 0.0)
            state = integrate(state, force, ankle, self.params, DT_S)
        return state

    def _retarget_swing(self, ctx: PullContext, t: float, force: Vec3):
        """Track the capture point while the foot is in flight.

        A plan made at lift time goes stale: the COM keeps falling during
        the swing, so the landing is replanned each tick against the
        predicted touchdown state, or lateral velocity compounds across
        steps and fast vaults overtake their anchor. Only gait and
        corrective swings retarget; trail and comfort targets are static
        by construction.
        """
        sw = self.swing
        if sw.plan is None or sw.plan.kind not in ("gait", "corrective"):
            return
        stance = self.state.stance_indices()
        facing = self.foot_yaws[stance[0]] if stance else self.pelvis_yaw
        state = self._predict_touchdown(t, force)
        if sw.plan.kind == "gait":
            plan = plan_gait_step(
                state, ctx, self.terrain, self.config, self.params, self.gait,
                facing,
            )
        else:
            plan = plan_corrective_step(
                state, ctx, self.terrain, self.config, self.params, facing
            )
        if plan.swing_leg_index != sw.leg:
            return
        sw.plan = plan
        sw.target = plan.target_foot_position
        sw.target_yaw_rad = plan.target_yaw_rad
        sw.trajectory = make_swing(sw.start, sw.target, SWING_APEX_M, sw.duration_s)
        sw.predicted_plant_m = math.dist(state.com_position, plan.target_foot_position)

    def _check_fallen(self) -> bool:
        com = self.state.com_position
        h = height_at(self.terrain, com[0], com[2], self.state.sim_time_s)
        if h is None:
            stance = self.state.stance_indices()
            h = self.state.legs[stance[0]].foot_anchor[1] if stance else 0.0
        return com[1] - h < self.config.fall_height_fraction * self.params.rest_length_m

    def _trail_plan(self) -> StepPlan | None:
        """Plant the lifted leg beside the stance foot to regain double support."""
        stance = self.state.stance_indices()
        if len(stance) != 1:
            return None
        trail_leg = 1 - stance[0]
        sign = 1.0 if trail_leg == 0 else -1.0
        heading = self.config.target_direction
        anchor = ground(self.state.legs[stance[0]].foot_anchor)
        slot = add2(anchor, scale2(left_of(heading), 2.0 * sign * self.config.stance_half_width_m))
        h = height_at(self.terrain, slot[0], slot[1], self.state.sim_time_s)
        if h is None:
            slot = anchor
            h = self.state.legs[stance[0]].foot_anchor[1]
        dist = norm2(sub2(slot, ground(self.state.legs[trail_leg].foot_anchor)))
        return StepPlan(
            base_distance_m=dist,
            biased_distance_m=dist,
            bias_factor=0.0,
            target_foot_position=(slot[0], h, slot[1]),
            swing_leg_index=trail_leg,
            target_yaw_rad=angle_of2(heading),
            kind="trail",
        )

    def _finish_swing(self, now: float):
        sw = self.swing
        self.swing = None
        tx, ty, tz = sw.target
        h = height_at(self.terrain, tx, tz, now)
        if h is not None:
            ty = h
        target = (tx, ty, tz)
        if sw.plan is None:
            leg = self.state.legs[sw.leg]
            leg.foot_anchor = target
            leg.is_stance = True
            self.events.append({"type": "plant", "leg": sw.leg, "target": list(target)})
        else:
            plan = replace(sw.plan, target_foot_position=target)
            self.state = exchange_support(self.state, plan)
            # keep the trailing foot grounded through the dwell: its spring
            # is compressed at touchdown and pushes off, the double support
            # phase that feeds energy back into the stride. Skipped when the
            # COM is plunging: two compressed springs would brake the vault
            # to a standstill at low height instead of redirecting it
            trailing = self.state.legs[1 - sw.leg]
            ground_y = height_at(
                self.terrain, trailing.foot_anchor[0], trailing.foot_anchor[2], now
            )
            if (
                ground_y is not None
                and abs(trailing.foot_anchor[1] - ground_y) < 0.02
                and self.state.com_velocity[1] > -0.8
            ):
                trailing.is_stance = True
            self.gait.note_exchange(now, sw.leg)
            self.events.append({"type": "exchange", "leg": sw.leg, "target": list(target)})
        self.foot_yaws[sw.leg] = sw.target_yaw_rad

    def _touchdown_due(self, now: float) -> bool:
        """Full swing elapsed, a deep landing foreseen, or an overtaken anchor.

        A capture only works if the foot is planted while it is still ahead
        of the mass and the leg is near full extension. At higher speeds the
        COM can cross the planned landing point mid-swing, or plunge so far
        that waiting out the swing would plant a deeply compressed spring
        whose recoil throws the mass backward. Both cut the swing short, so
        cadence rises with speed instead of staying pinned to the nominal
        duration.
        """
        sw = self.swing
        if now - sw.start_s >= sw.duration_s - 1e-9:
            return True
        if sw.plan is None or now - sw.start_s < SWING_CUT_MIN_PHASE * sw.duration_s:
            return False
        if sw.predicted_plant_m < PLANT_DEPTH_FRACTION * self.params.rest_length_m:
            return True
        v_h = ground(self.state.com_velocity)
        speed = norm2(v_h)
        if speed < 1e-6:
            return False
        com = ground(self.state.com_position)
        lead = dot2(sub2((sw.target[0], sw.target[2]), com), scale2(v_h, 1.0 / speed))
        # plant the moment the COM is about to pass the anchor: within a tick
        return lead <= speed * DT_S

    def _swing_ankle(self, state: SlipState) -> Vec3:
        """Velocity servo through single support while walking.

        The dwell is a twentieth of the stride, so ankle work applied only
        there cannot offset what the leg damper burns each vault. The stance
        ankle keeps serving the commanded travel velocity during the swing,
        damper term only: the recentering spring would fight the vault,
        whose whole job is to carry the mass past the anchor.
        """
        v_h = ground(state.com_velocity)
        vt = scale2(self.config.target_direction, self.config.target_speed_mps)
        fx = -self.config.ankle_damping_c * (v_h[0] - vt[0])
        fz = -self.config.ankle_damping_c * (v_h[1] - vt[1])
        stance = state.stance_indices()
        ref_y = state.legs[stance[0]].foot_anchor[1] if stance else 0.0
        bound = ankle_force_bound_n(
            self.config, self.params, state.com_position[1] - ref_y
        )
        mag = math.hypot(fx, fz)
        if mag > bound:
            s = bound / mag
            fx, fz = fx * s, fz * s
        return (fx, 0.0, fz)

    def _swing_foot_position(self, now: float) -> Vec3 | None:
        if self.swing is None:
            return None
        phase = (now - self.swing.start_s) / self.swing.duration_s
        phase = min(max(phase, 0.0), 1.0)
        return swing_position(self.swing.trajectory, phase)

    def _solve_pose(self, swing_override: tuple[Vec3 | None, Vec3 | None]) -> Pose:
        com = self.state.com_position
        targets = []
        for i in (0, 1):
            pos = swing_override[i]
            if pos is None:
                pos = self.state.legs[i].foot_anchor
            targets.append(FootTarget(pos, self.foot_yaws[i]))
        try:
            pose = solve_lower_ik(self.skeleton, com, (targets[0], targets[1]), self.pelvis_yaw)
        except ReachabilityError:
            # pull overlong horizontal targets toward the pelvis and retry
            reach = leg_reach_m(self.skeleton, "l") * 0.98
            fixed = []
            for t in targets:
                dx = t.position[0] - com[0]
                dz = t.position[2] - com[2]
                dy = com[1] - t.position[1]
                max_h = math.sqrt(max(reach * reach - min(dy, reach) ** 2, 1e-6))
                h = math.hypot(dx, dz)
                if h > max_h:
                    s = max_h / h
                    fixed.append(
                        FootTarget(
                            (com[0] + dx * s, t.position[1], com[2] + dz * s),
                            t.yaw_rad,
                        )
                    )
                else:
                    fixed.append(t)
            pose = solve_lower_ik(self.skeleton, com, (fixed[0], fixed[1]), self.pelvis_yaw)
        if self.box_mass_kg > 0.0:
            fk = forward_kinematics(self.skeleton, pose)
            chest = fk["spine2"][1]
            fwd = (math.cos(self.pelvis_yaw), math.sin(self.pelvis_yaw))
            lat = left_of(fwd)
            grips = tuple(
                (
                    chest[0] + fwd[0] * HAND_BOX_AHEAD_M + lat[0] * s * HAND_BOX_HALF_GAP_M,
                    chest[1],
                    chest[2] + fwd[1] * HAND_BOX_AHEAD_M + lat[1] * s * HAND_BOX_HALF_GAP_M,
                )
                for s in (1.0, -1.0)
            )
            pose = solve_upper_ik(
                self.skeleton, pose, torso_yaw_rad=0.0, hand_targets=grips
            )
        else:
            pose = solve_upper_ik(self.skeleton, pose, torso_yaw_rad=0.0)
        return pose

    def _turn_pelvis(self):
        target = angle_of2(self.config.target_direction)
        delta = wrap_angle(target - self.pelvis_yaw)
        max_step = PELVIS_TURN_RATE_RPS * DT_S
        delta = min(max(delta, -max_step), max_step)
        self.pelvis_yaw = wrap_angle(self.pelvis_yaw + delta)

    def step(self) -> dict:
        """Advance one tick and return its trace record."""
        if self.fallen:
            raise EngineStopped("character has fallen; reset to continue")
        t = self.time_s
        self.events = []

        while self._pending and self._pending[0].time_s <= t + 1e-12:
            self.apply_entry(self._pending.pop(0))

        force = self._external_force(t)
        ctx = self._pull_context(force)
        self._ride_terrain()

        mode = "swing"
        ankle: Vec3 = (0.0, 0.0, 0.0)
        step_event = None

        if self.swing is None:
            decision = decide(
                self.state, ctx, self.terrain, self.config, self.params,
                self.gait, (self.foot_yaws[0], self.foot_yaws[1]),
            )
            for leg, rest in zip(self.state.legs, decision.new_rest_lengths_m):
                leg.current_rest_length_m = rest
            mode = decision.mode.value
            if decision.mode is BalanceMode.FALLEN:
                self.fallen = True
                self.tick += 1
                return self._record(t, mode, ankle, None, force)
            if decision.mode in (BalanceMode.STEP, BalanceMode.COMFORT_STEP):
                plan = decision.step_plan
                stance = self.state.stance_indices()
                if stance == [plan.swing_leg_index]:
                    plan = replace(plan, swing_leg_index=1 - plan.swing_leg_index)
                self._start_swing(plan, t)
                step_event = {
                    "kind": plan.kind,
                    "leg": plan.swing_leg_index,
                    "base_m": plan.base_distance_m,
                    "biased_m": plan.biased_distance_m,
                    "bias_factor": plan.bias_factor,
                    "target": list(plan.target_foot_position),
                }
                self.events.append({"type": "step", **step_event})
            else:
                ankle = decision.ankle_force_n
                speed = norm2(ground(self.state.com_velocity))
                walking = self.config.target_speed_mps > 0.0
                if (
                    not walking
                    and speed < self.config.quiescent_speed_mps
                    and len(self.state.stance_indices()) == 1
                ):
                    trail = self._trail_plan()
                    if trail is not None:
                        self._start_swing(trail, t, trail=True)
                        mode = "trail"
        else:
            self._retarget_swing(ctx, t, force)
            if self._check_fallen():
                self.fallen = True
                self.tick += 1
                return self._record(t, "fallen", ankle, None, force)
            if self.config.target_speed_mps > 0.0:
                ankle = self._swing_ankle(self.state)

        self.state = integrate(self.state, force, ankle, self.params, DT_S)
        now = self.state.sim_time_s

        if self.swing is not None and self._touchdown_due(now):
            if now - self.swing.start_s < self.swing.duration_s - 1e-9:
                # cut short: re-plan against the state the plant actually
                # lands in, not the full-duration prediction it was aimed at
                self.swing.duration_s = now - self.swing.start_s
                self._retarget_swing(ctx, now, force)
            self._finish_swing(now)

        self._turn_pelvis()
        swing_pos = (
            self._swing_foot_position(now) if self.swing is not None else None
        )
        override: list[Vec3 | None] = [None, None]
        if self.swing is not None:
            override[self.swing.leg] = swing_pos
        pose = self._solve_pose((override[0], override[1]))

        n = self.skeleton.internal_dof_count
        vel = tuple(
            (pose.angles[i] - self._pose_prev.angles[i]) / DT_S for i in range(n)
        )
        ratios = current_inertia_ratios(
            self.skeleton, self._pose_prev, self.rescaled_joints, self.ref_inertias
        )
        report = track_pose(
            self.skeleton,
            self._pose_prev,
            self._vel_prev,
            pose,
            vel,
            self.gains,
            inertia_ratio_by_joint=ratios,
        )
        self._pose_prev = pose
        self._vel_prev = vel
        self.pose = pose
        self.tick += 1
        return self._record(t, mode, ankle, step_event, force, report)

    # ------------------------------------------------------------- snapshots

    def joint_world_positions(self) -> dict[str, Vec3]:
        """World position per joint for the current pose."""
        world = forward_kinematics(self.skeleton, self.pose)
        return {name: p for name, (_r, p) in world.items()}

    def snapshot_state(self) -> dict:
        """Complete mutable state as a JSON-safe document.

        from_snapshot() inverts it exactly: a restored engine continues with
        byte-identical trace records, including mid-swing. Swing trajectories
        are not stored; they rebuild deterministically from their endpoints.
        Infinities travel as None.
        """
        s = self.state
        sw = self.swing
        swing_doc = None
        if sw is not None:
            plan_doc = None
            if sw.plan is not None:
                plan_doc = {f.name: getattr(sw.plan, f.name) for f in fields(StepPlan)}
                plan_doc["target_foot_position"] = list(sw.plan.target_foot_position)
            swing_doc = {
                "leg": sw.leg,
                "plan": plan_doc,
                "start_s": sw.start_s,
                "duration_s": sw.duration_s,
                "start": list(sw.start),
                "target": list(sw.target),
                "target_yaw_rad": sw.target_yaw_rad,
                "predicted_plant_m": (
                    None if math.isinf(sw.predicted_plant_m) else sw.predicted_plant_m
                ),
            }
        gait = {f.name: getattr(self.gait, f.name) for f in fields(GaitContext)}
        if math.isinf(gait["last_exchange_s"]):
            gait["last_exchange_s"] = None
        config = {f.name: getattr(self.config, f.name) for f in fields(ControllerConfig)}
        config["target_direction"] = list(self.config.target_direction)
        return {
            "schema_version": SNAPSHOT_SCHEMA_VERSION,
            "scenario": scenario_to_dict(self.scenario),
            "tick": self.tick,
            "fallen": self.fallen,
            "box_mass_kg": self.box_mass_kg,
            "leg_scale": self.leg_scale,
            "terrain": terrain_to_config(self.terrain),
            "config": config,
            "gait": gait,
            "com": list(s.com_position),
            "vel": list(s.com_velocity),
            "sim_time_s": s.sim_time_s,
            "legs": [
                {
                    "anchor": list(leg.foot_anchor),
                    "rest_m": leg.current_rest_length_m,
                    "stance": leg.is_stance,
                }
                for leg in s.legs
            ],
            "swing": swing_doc,
            "pushes": [
                {"start_s": p.start_s, "end_s": p.end_s, "force_n": list(p.force_n)}
                for p in self.pushes
            ],
            "pending": [_entry_to_dict(e) for e in self._pending],
            "foot_yaws": list(self.foot_yaws),
            "pelvis_yaw": self.pelvis_yaw,
            "pose": {
                "root_position": list(self.pose.root_position),
                "root_rotation": list(self.pose.root_rotation),
                "angles": list(self.pose.angles),
            },
            "joint_velocities": list(self._vel_prev),
        }

    @classmethod
    def from_snapshot(cls, doc: dict, skeleton=None) -> "SteppingEngine":
        version = doc.get("schema_version")
        if version != SNAPSHOT_SCHEMA_VERSION:
            raise ValueError(
                f"snapshot schema_version must be {SNAPSHOT_SCHEMA_VERSION}, "
                f"got {version!r}"
            )
        eng = cls(scenario_from_dict(doc["scenario"]), skeleton=skeleton)
        eng.tick = int(doc["tick"])
        eng.fallen = bool(doc["fallen"])
        eng.box_mass_kg = float(doc["box_mass_kg"])
        eng.leg_scale = float(doc["leg_scale"])
        eng._refresh_params()
        eng.terrain = terrain_from_config(doc["terrain"])
        cfg = dict(doc["config"])
        cfg["target_direction"] = tuple(cfg["target_direction"])
        eng.config = ControllerConfig(**cfg)
        gait = dict(doc["gait"])
        if gait["last_exchange_s"] is None:
            gait["last_exchange_s"] = float("-inf")
        eng.gait = GaitContext(**gait)
        eng.state = SlipState(
            com_position=tuple(doc["com"]),
            com_velocity=tuple(doc["vel"]),
            legs=tuple(
                LegRecord(tuple(leg["anchor"]), leg["rest_m"], leg["stance"])
                for leg in doc["legs"]
            ),
            sim_time_s=float(doc["sim_time_s"]),
        )
        sw = doc["swing"]
        if sw is None:
            eng.swing = None
        else:
            plan = None
            if sw["plan"] is not None:
                raw = dict(sw["plan"])
                raw["target_foot_position"] = tuple(raw["target_foot_position"])
                plan = StepPlan(**raw)
            start = tuple(sw["start"])
            target = tuple(sw["target"])
            duration = float(sw["duration_s"])
            depth = sw["predicted_plant_m"]
            eng.swing = _ActiveSwing(
                leg=int(sw["leg"]),
                plan=plan,
                start_s=float(sw["start_s"]),
                duration_s=duration,
                start=start,
                trajectory=make_swing(start, target, SWING_APEX_M, duration),
                target=target,
                target_yaw_rad=float(sw["target_yaw_rad"]),
                predicted_plant_m=math.inf if depth is None else float(depth),
            )
        eng.pushes = [
            _ActivePush(p["start_s"], p["end_s"], tuple(p["force_n"]))
            for p in doc["pushes"]
        ]
        eng._pending = [_entry_from_dict(e) for e in doc["pending"]]
        eng.foot_yaws = [float(y) for y in doc["foot_yaws"]]
        eng.pelvis_yaw = float(doc["pelvis_yaw"])
        pose = Pose(
            root_position=tuple(doc["pose"]["root_position"]),
            root_rotation=tuple(doc["pose"]["root_rotation"]),
            angles=tuple(doc["pose"]["angles"]),
        )
        eng.pose = pose
        eng._pose_prev = pose
        eng._vel_prev = tuple(doc["joint_velocities"])
        eng.events = []
        return eng

    # ------------------------------------------------------------ recording

    def _region_label(self) -> str:
        stance = [ground(l.foot_anchor) for l in self.state.legs if l.is_stance]
        if not stance:
            return "none"
        region = build_support_region(stance, self.config.foot_radius_m)
        cls = classify_com(ground(self.state.com_position), region, self.config)
        return cls.label.value

    def _record(self, t, mode, ankle, step_event, force, report=None) -> dict:
        s = self.state
        return {
            "schema_version": TRACE_SCHEMA_VERSION,
            "tick": self.tick - 1,
            "time_s": round(t, 9),
            "com": list(s.com_position),
            "vel": list(s.com_velocity),
            "mode": mode,
            "region": self._region_label(),
            "ankle_force_n": list(ankle),
            "external_force_n": list(force),
            "rest_lengths_m": [s.legs[0].current_rest_length_m, s.legs[1].current_rest_length_m],
            "feet": [list(s.legs[0].foot_anchor), list(s.legs[1].foot_anchor)],
            "stance": [s.legs[0].is_stance, s.legs[1].is_stance],
            "step_event": step_event,
            "events": list(self.events),
            "torque_max_nm": 0.0 if report is None else report.max_abs_nm,
            "torque_mean_nm": 0.0 if report is None else report.mean_abs_nm,
            "energy_j": total_energy(s, self.params),
            "fallen": self.fallen,
        }
