"""Balance decision layer: support region, ankle feedback, step planning.

Every function here is pure: the tick loop owns all mutable state and passes
it in. Leg index 0 is the left leg, 1 the right; facing +x with y up, left
is -z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .slip import (
    PullContext,
    SlipError,
    SlipParams,
    SlipState,
    StepDomainError,
    StepPlan,
    halt_condition,
    pull_bias,
    regulated_step_distance,
    spring_error_bias,
    step_distance,
)
from .terrain import NoGroundError, Terrain, height_at, nearest_ground, terrain_offset_for_step
from .vec import (
    Vec2,
    Vec3,
    add2,
    angle_of2,
    dot2,
    ground,
    norm2,
    normalize2,
    rotate2,
    scale2,
    sub2,
    wrap_angle,
)


class TerrainStepError(SlipError):
    """Height difference under the feet exceeds what the legs can absorb."""


def left_of(direction: Vec2) -> Vec2:
    # facing +x with y up, left is -z; rotate2's positive sense is x toward z
    return rotate2(direction, -math.pi / 2.0)


@dataclass(frozen=True)
class FootCircle:
    center: Vec2
    radius: float


@dataclass(frozen=True)
class BridgeCapsule:
    a: Vec2
    b: Vec2
    radius: float


@dataclass(frozen=True)
class SupportRegion:
    foot_circles: tuple[FootCircle, ...]
    bridge_capsule: BridgeCapsule | None


class RegionLabel(Enum):
    INNER = "inner"
    MARGIN = "margin"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class RegionClass:
    label: RegionLabel
    offset: Vec2
    normalized_radius: float


class BalanceMode(Enum):
    STAND_SWAY = "stand_sway"
    STEP = "step"
    COMFORT_STEP = "comfort_step"
    FALLEN = "fallen"


@dataclass
class ControllerConfig:
    """Gains, thresholds and geometry for the decision layer.

    target_speed_mps = 0 means stand in place; > 0 engages the walking gait
    toward target_direction.
    """

    target_speed_mps: float = 0.0
    target_direction: Vec2 = (1.0, 0.0)
    ankle_gain_k: float = 2000.0
    ankle_damping_c: float = 300.0
    foot_radius_m: float = 0.12
    r_inner: float = 0.6
    comfort_yaw_limit_rad: float = math.radians(30.0)
    comfort_lateral_min_m: float = 0.02
    comfort_lateral_max_m: float = 0.35
    comfort_longitudinal_max_m: float = 0.35
    stance_half_width_m: float = 0.1
    max_turn_per_step_rad: float = math.radians(30.0)
    swing_duration_s: float = 0.35
    fall_height_fraction: float = 0.5
    max_step_length_m: float = 0.7
    quiescent_speed_mps: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.r_inner < 1.0:
            raise ValueError("r_inner must be in (0, 1)")
        if self.swing_duration_s <= 0.0:
            raise ValueError("swing_duration_s must be > 0")
        if self.foot_radius_m <= 0.0:
            raise ValueError("foot_radius_m must be > 0")
        if self.target_speed_mps < 0.0:
            raise ValueError("target_speed_mps must be >= 0")
        if abs(norm2(self.target_direction) - 1.0) > 1e-9:
            raise ValueError("target_direction must be unit length")


@dataclass
class GaitContext:
    """Walking-gait bookkeeping owned by the tick loop.

    A step becomes due once dwell_s has elapsed since the last support
    exchange and the body is either already underway or has begun tipping
    forward (small speed or ahead-of-foot offset). decide() only reads this;
    the loop updates it on every exchange.
    """

    dwell_s: float = 0.05
    start_speed_mps: float = 0.15
    lead_offset_m: float = 0.04
    # each step asks the vault to crest at apex_gain * target speed. The
    # crest is the slow phase of the stride and dominates the time average,
    # so the time-mean speed tracks the crest speed, not the touchdown speed.
    apex_gain: float = 1.0
    # fraction of the above-target speed excess a single catch leaves in
    brake_softness: float = 0.0
    # seconds of cross-heading drift velocity folded into the lateral slot
    drift_hold_s: float = 0.1
    last_exchange_s: float = float("-inf")
    next_swing_leg: int = 0
    started: bool = False

    def note_exchange(self, t: float, swung_leg: int) -> None:
        self.last_exchange_s = t
        self.next_swing_leg = 1 - swung_leg
        self.started = True


@dataclass(frozen=True)
class BalanceDecision:
    mode: BalanceMode
    ankle_force_n: Vec3
    step_plan: StepPlan | None
    new_rest_lengths_m: tuple[float, float]

    def __post_init__(self) -> None:
        has_plan = self.step_plan is not None
        needs_plan = self.mode in (BalanceMode.STEP, BalanceMode.COMFORT_STEP)
        if has_plan != needs_plan:
            raise ValueError("step_plan present iff mode is STEP or COMFORT_STEP")


def build_support_region(
    foot_centers: list[Vec2] | tuple[Vec2, ...], foot_radius_m: float
) -> SupportRegion:
    """Ground-projected circles under the stance feet, bridged in double support."""
    if len(foot_centers) == 0:
        raise ValueError("support region needs at least one stance foot")
    if foot_radius_m <= 0.0:
        raise ValueError("foot_radius_m must be > 0")
    circles = tuple(FootCircle(center=(c[0], c[1]), radius=foot_radius_m) for c in foot_centers)
    capsule = None
    if len(circles) == 2:
        capsule = BridgeCapsule(a=circles[0].center, b=circles[1].center, radius=foot_radius_m)
    return SupportRegion(foot_circles=circles, bridge_capsule=capsule)


def _closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2:
    ab = sub2(b, a)
    denom = dot2(ab, ab)
    if denom < 1e-18:
        return a
    t = dot2(sub2(p, a), ab) / denom
    t = min(1.0, max(0.0, t))
    return add2(a, scale2(ab, t))


def classify_com(com_ground: Vec2, region: SupportRegion, config: ControllerConfig) -> RegionClass:
    """Distance to the nearest support primitive, normalized by its radius.

    The offset is measured from that primitive's reference point (circle
    center, or nearest point of the bridge segment), which is what the ankle
    feedback pushes back toward.
    """
    best_norm = math.inf
    best_offset: Vec2 = (0.0, 0.0)
    for circle in region.foot_circles:
        off = sub2(com_ground, circle.center)
        n = norm2(off) / circle.radius
        if n < best_norm:
            best_norm = n
            best_offset = off
    if region.bridge_capsule is not None:
        cap = region.bridge_capsule
        ref = _closest_on_segment(com_ground, cap.a, cap.b)
        off = sub2(com_ground, ref)
        n = norm2(off) / cap.radius
        if n < best_norm:
            best_norm = n
            best_offset = off
    if best_norm <= config.r_inner:
        label = RegionLabel.INNER
    elif best_norm <= 1.0:
        label = RegionLabel.MARGIN
    else:
        label = RegionLabel.OUTSIDE
    return RegionClass(label=label, offset=best_offset, normalized_radius=best_norm)


def ankle_force_bound_n(config: ControllerConfig, params: SlipParams, com_height_m: float) -> float:
    """Largest horizontal force whose equivalent COP stays inside the foot."""
    h = max(com_height_m, 1e-6)
    return config.foot_radius_m * params.mass_kg * params.gravity_mps2 / h


def ankle_feedback(
    state: SlipState, region: SupportRegion, config: ControllerConfig, params: SlipParams
) -> Vec3:
    """Horizontal spring-damper force recentering the COM over the feet.

    The spring acts on the offset from the stance centroid, not the nearest
    primitive: along the bridge between two stance feet the nearest-point
    offset vanishes, which would leave that line neutrally stable and let
    the body wander into a crossed stance. The damping term acts on the
    velocity error against the commanded travel velocity, so a zero target
    reduces it to plain damping. Clamped to the COP torque-equivalence
    bound.
    """
    n = len(region.foot_circles)
    cx = sum(c.center[0] for c in region.foot_circles) / n
    cz = sum(c.center[1] for c in region.foot_circles) / n
    offset = sub2(ground(state.com_position), (cx, cz))
    v_h = ground(state.com_velocity)
    target_v = scale2(config.target_direction, config.target_speed_mps)
    fx = -config.ankle_gain_k * offset[0] - config.ankle_damping_c * (v_h[0] - target_v[0])
    fz = -config.ankle_gain_k * offset[1] - config.ankle_damping_c * (v_h[1] - target_v[1])
    stance_y = [state.legs[i].foot_anchor[1] for i in state.stance_indices()]
    ref_y = sum(stance_y) / len(stance_y) if stance_y else 0.0
    bound = ankle_force_bound_n(config, params, state.com_position[1] - ref_y)
    mag = math.hypot(fx, fz)
    if mag > bound:
        s = bound / mag
        fx *= s
        fz *= s
    return (fx, 0.0, fz)


def adjust_rest_lengths(
    stance_heights_m: tuple[float, float], rest_length_m: float
) -> tuple[float, float]:
    """Shorten the uphill leg by the height difference; the lower leg gets
    the full rest length, keeping the pelvis level across a terrain step."""
    h0, h1 = stance_heights_m
    dh = abs(h1 - h0)
    if dh >= rest_length_m:
        raise TerrainStepError(
            f"height difference {dh:.3f} m under the feet exceeds leg length {rest_length_m:.3f} m"
        )
    if h0 > h1:
        return (rest_length_m - dh, rest_length_m)
    if h1 > h0:
        return (rest_length_m, rest_length_m - dh)
    return (rest_length_m, rest_length_m)


def _stance_and_height(state: SlipState, params: SlipParams) -> tuple[int, float]:
    """Pivot stance leg index and the COM height above its anchor."""
    stance = state.stance_indices()
    if not stance:
        raise ValueError("no stance leg")
    com_g = ground(state.com_position)
    pivot = min(stance, key=lambda i: norm2(sub2(ground(state.legs[i].foot_anchor), com_g)))
    h = state.com_position[1] - state.legs[pivot].foot_anchor[1]
    return pivot, max(h, 0.05)


def _snap_target(
    terrain: Terrain,
    from_xz: Vec2,
    to_xz: Vec2,
    t: float,
) -> tuple[Vec2, float]:
    """Target pulled back to ground if needed, plus its height."""
    h = height_at(terrain, to_xz[0], to_xz[1], t)
    if h is None:
        to_xz = nearest_ground(terrain, from_xz, to_xz, t)
        h = height_at(terrain, to_xz[0], to_xz[1], t)
        if h is None:
            raise NoGroundError(f"no ground reachable toward {to_xz}")
    return to_xz, h


def _swing_leg_for_target(state: SlipState, target_xz: Vec2) -> int:
    stance = state.stance_indices()
    if len(stance) == 1:
        return 1 - stance[0]
    d0 = norm2(sub2(ground(state.legs[0].foot_anchor), target_xz))
    d1 = norm2(sub2(ground(state.legs[1].foot_anchor), target_xz))
    return 0 if d0 > d1 else 1


# exchange spawns the new spring at whatever length separates COM and
# anchor; a spawn stretched past rest yanks the mass toward the foot
REACH_FRACTION = 0.98


def _clamp_reach(
    plan: StepPlan,
    state: SlipState,
    terrain: Terrain,
    params: SlipParams,
) -> StepPlan:
    """Pull the target toward the COM until the leg can reach it.

    Step distances are planned in the ground plane; on a descent the target
    sits below the takeoff and the true COM-to-anchor length can exceed the
    rest length even for a modest horizontal distance. Bisection on the
    horizontal offset, re-snapping the height each probe, finds the longest
    reachable step along the planned ray.
    """
    cap = REACH_FRACTION * params.rest_length_m
    com = state.com_position
    tx, ty, tz = plan.target_foot_position
    if math.dist(com, (tx, ty, tz)) <= cap:
        return plan
    from_xz = ground(state.legs[plan.swing_leg_index ^ 1].foot_anchor)
    delta = sub2((tx, tz), (com[0], com[2]))
    lo, hi = 0.0, 1.0
    best: tuple[Vec2, float] | None = None
    for _ in range(32):
        s = 0.5 * (lo + hi)
        probe = add2((com[0], com[2]), scale2(delta, s))
        try:
            probe, h = _snap_target(terrain, from_xz, probe, state.sim_time_s)
        except NoGroundError:
            hi = s
            continue
        if math.dist(com, (probe[0], h, probe[1])) <= cap:
            lo = s
            best = (probe, h)
        else:
            hi = s
    if best is None:
        return plan
    (px, pz), h = best
    d = norm2(sub2((px, pz), (com[0], com[2])))
    return replace(
        plan,
        biased_distance_m=min(plan.biased_distance_m, d),
        target_foot_position=(px, h, pz),
    )


def _build_plan(
    state: SlipState,
    ctx: PullContext,
    terrain: Terrain,
    config: ControllerConfig,
    params: SlipParams,
    direction: Vec2,
    base_d: float,
    kind: str,
    facing_yaw_rad: float = 0.0,
) -> StepPlan:
    """Bias the base distance, snap the target to terrain, pick the swing leg.

    The plan's yaw starts at the character's current facing, so steer_adjust
    turns the step only when the facing disagrees with the travel target.
    Seeding it with the velocity direction instead would rotate disturbance
    captures off the ballistic line and recovery stops working.
    """
    pivot, _ = _stance_and_height(state, params)
    beta, biased = pull_bias(ctx, base_d, params)
    biased = spring_error_bias(biased, state.legs[pivot], state, params)
    biased = min(max(biased, 0.0), config.max_step_length_m)
    com_g = ground(state.com_position)
    from_xz = ground(state.legs[pivot].foot_anchor)
    target_xz = add2(com_g, scale2(direction, biased))
    target_xz, target_h = _snap_target(terrain, from_xz, target_xz, state.sim_time_s)
    plan = StepPlan(
        base_distance_m=base_d,
        biased_distance_m=biased,
        bias_factor=beta,
        target_foot_position=(target_xz[0], target_h, target_xz[1]),
        swing_leg_index=_swing_leg_for_target(state, target_xz),
        target_yaw_rad=facing_yaw_rad,
        kind=kind,
    )
    return _clamp_reach(steer_adjust(plan, config, from_xz), state, terrain, params)


def plan_corrective_step(
    state: SlipState,
    ctx: PullContext,
    terrain: Terrain,
    config: ControllerConfig,
    params: SlipParams,
    facing_yaw_rad: float = 0.0,
) -> StepPlan:
    """Capture step: vault the disturbance speed down to rest.

    Distance comes from the rest-at-apex vault balance, then the pull and
    spring-error biases. If the terrain offset at the target makes the vault
    infeasible, the offset target shrinks toward the stance foot.
    """
    v_h = ground(state.com_velocity)
    speed = norm2(v_h)
    direction = normalize2(v_h) if speed > 1e-9 else config.target_direction
    pivot, com_h = _stance_and_height(state, params)
    from_xz = ground(state.legs[pivot].foot_anchor)
    com_g = ground(state.com_position)

    offset_m = 0.0
    base_d = step_distance(speed, com_h, 0.0, params.gravity_mps2)
    for _ in range(3):
        probe = add2(com_g, scale2(direction, base_d))
        try:
            probe, _ = _snap_target(terrain, from_xz, probe, state.sim_time_s)
            offset_m = terrain_offset_for_step(terrain, from_xz, probe, state.sim_time_s)
        except NoGroundError:
            break
        try:
            base_d = step_distance(speed, com_h, offset_m, params.gravity_mps2)
        except StepDomainError:
            # terrain rises faster than the energy allows: halve the reach
            base_d *= 0.5
    return _build_plan(
        state, ctx, terrain, config, params, direction, base_d, "corrective",
        facing_yaw_rad,
    )


def plan_gait_step(
    state: SlipState,
    ctx: PullContext,
    terrain: Terrain,
    config: ControllerConfig,
    params: SlipParams,
    gait: GaitContext,
    facing_yaw_rad: float = 0.0,
) -> StepPlan:
    """Walking step: vault to an apex speed that corrects toward the target.

    Asking the vault to leave 2*target - v at the apex makes the mean of
    pre and post speeds equal the target over one stride.
    """
    v_h = ground(state.com_velocity)
    speed = norm2(v_h)
    direction = normalize2(v_h) if speed > 0.05 else config.target_direction
    pivot, com_h = _stance_and_height(state, params)
    from_xz = ground(state.legs[pivot].foot_anchor)
    apex_target = gait.apex_gain * config.target_speed_mps
    if speed > apex_target:
        # shed only part of the excess per catch; braking the whole excess
        # in one step overshoots into a stall on a descent, where gravity
        # rebuilds the speed and the stall repeats as a limit cycle
        apex_target += gait.brake_softness * (speed - apex_target)
    base_d = regulated_step_distance(speed, apex_target, com_h, params.gravity_mps2)
    plan = _build_plan(
        state, ctx, terrain, config, params, direction, base_d, "gait", facing_yaw_rad
    )
    # shift the landing point to the swing leg's side of the (steered) travel line
    steered = (math.cos(plan.target_yaw_rad), math.sin(plan.target_yaw_rad))
    side_sign = 1.0 if gait.next_swing_leg == 0 else -1.0
    lateral = scale2(left_of(steered), side_sign * config.stance_half_width_m)
    # heading hold: extra lateral offset proportional to drift velocity
    # across the commanded heading; moving the anchor toward the drift
    # side brakes it through the vault without rotating the capture line
    lat_axis = left_of(config.target_direction)
    drift = dot2(v_h, lat_axis)
    lateral = add2(lateral, scale2(lat_axis, gait.drift_hold_s * drift))
    tx, ty, tz = plan.target_foot_position
    target_xz = (tx + lateral[0], tz + lateral[1])
    target_xz, target_h = _snap_target(terrain, from_xz, target_xz, state.sim_time_s)
    plan = replace(
        plan,
        target_foot_position=(target_xz[0], target_h, target_xz[1]),
        swing_leg_index=gait.next_swing_leg,
        kind="gait",
    )
    return _clamp_reach(plan, state, terrain, params)


def steer_adjust(plan: StepPlan, config: ControllerConfig, stance_foot_xz: Vec2) -> StepPlan:
    """Rotate the step target about the stance foot toward the travel target.

    The turn per step is clamped; the target's distance from the stance foot
    is untouched.
    """
    arm = sub2((plan.target_foot_position[0], plan.target_foot_position[2]), stance_foot_xz)
    if norm2(arm) < 1e-9:
        return plan
    desired = wrap_angle(angle_of2(config.target_direction) - plan.target_yaw_rad)
    turn = min(config.max_turn_per_step_rad, max(-config.max_turn_per_step_rad, desired))
    if turn == 0.0:
        return plan
    rotated = add2(stance_foot_xz, rotate2(arm, turn))
    return replace(
        plan,
        target_foot_position=(rotated[0], plan.target_foot_position[1], rotated[1]),
        target_yaw_rad=wrap_angle(plan.target_yaw_rad + turn),
    )


def comfort_check(
    state: SlipState,
    foot_yaws_rad: tuple[float, float],
    pelvis_direction: Vec2,
    config: ControllerConfig,
) -> StepPlan | None:
    """Detect a crossed, splayed or misaligned stance and plan the fix.

    Checked per foot in the pelvis frame: the left foot belongs on the left
    of the pelvis axis within the lateral margins and within the
    longitudinal margin; yaw must stay within the comfort limit. The first
    offending foot gets a step back to its nominal slot.
    """
    pelvis_xz = ground(state.com_position)
    fwd = pelvis_direction
    left = left_of(fwd)
    pelvis_yaw = angle_of2(fwd)
    for leg_index in (0, 1):
        rel = sub2(ground(state.legs[leg_index].foot_anchor), pelvis_xz)
        lateral = dot2(rel, left)
        longitudinal = dot2(rel, fwd)
        side_sign = 1.0 if leg_index == 0 else -1.0
        signed = lateral * side_sign  # positive when on its own side
        crossed = signed < config.comfort_lateral_min_m
        splayed = signed > config.comfort_lateral_max_m
        overreach = abs(longitudinal) > config.comfort_longitudinal_max_m
        twisted = abs(wrap_angle(foot_yaws_rad[leg_index] - pelvis_yaw)) > config.comfort_yaw_limit_rad
        if not (crossed or splayed or overreach or twisted):
            continue
        slot = add2(pelvis_xz, scale2(left, side_sign * config.stance_half_width_m))
        dist = norm2(sub2(slot, pelvis_xz))
        return StepPlan(
            base_distance_m=dist,
            biased_distance_m=dist,
            bias_factor=0.0,
            target_foot_position=(slot[0], state.legs[leg_index].foot_anchor[1], slot[1]),
            swing_leg_index=leg_index,
            target_yaw_rad=pelvis_yaw,
            kind="comfort",
        )
    return None


def _rest_lengths(state: SlipState, terrain: Terrain, params: SlipParams) -> tuple[float, float]:
    heights = []
    for leg in state.legs:
        h = height_at(terrain, leg.foot_anchor[0], leg.foot_anchor[2], state.sim_time_s)
        heights.append(h)
    if heights[0] is None and heights[1] is None:
        return (params.rest_length_m, params.rest_length_m)
    if heights[0] is None:
        heights[0] = heights[1]
    if heights[1] is None:
        heights[1] = heights[0]
    return adjust_rest_lengths((heights[0], heights[1]), params.rest_length_m)


def decide(
    state: SlipState,
    ctx: PullContext,
    terrain: Terrain,
    config: ControllerConfig,
    params: SlipParams,
    gait: GaitContext | None = None,
    foot_yaws_rad: tuple[float, float] = (0.0, 0.0),
) -> BalanceDecision:
    """One control decision: fall check, step triggers, else ankle sway.

    Corrective steps fire when the COM is outside the support region and
    still moving away from it; while it is converging (mid-vault after an
    exchange) stepping again would never let a vault finish. The walking
    gait fires on its own dwell schedule. Rest lengths are recomputed every
    call so the legs ride moving terrain.
    """
    rest = _rest_lengths(state, terrain, params)

    com_g = ground(state.com_position)
    ground_h = height_at(terrain, com_g[0], com_g[1], state.sim_time_s)
    if ground_h is None:
        stance = state.stance_indices()
        ground_h = state.legs[stance[0]].foot_anchor[1] if stance else 0.0
    if state.com_position[1] - ground_h < config.fall_height_fraction * params.rest_length_m:
        return BalanceDecision(
            mode=BalanceMode.FALLEN,
            ankle_force_n=(0.0, 0.0, 0.0),
            step_plan=None,
            new_rest_lengths_m=rest,
        )

    stance_feet = [ground(state.legs[i].foot_anchor) for i in state.stance_indices()]
    region = build_support_region(stance_feet, config.foot_radius_m)
    cls = classify_com(com_g, region, config)
    v_h = ground(state.com_velocity)
    speed = norm2(v_h)

    walking = config.target_speed_mps > 0.0 and gait is not None

    facing = foot_yaws_rad[_stance_and_height(state, params)[0]]

    diverging = dot2(cls.offset, v_h) > 0.0
    if cls.label is RegionLabel.OUTSIDE and diverging:
        plan = plan_corrective_step(state, ctx, terrain, config, params, facing)
        return BalanceDecision(BalanceMode.STEP, (0.0, 0.0, 0.0), plan, rest)

    if not walking and not halt_condition(ctx):
        plan = plan_corrective_step(state, ctx, terrain, config, params, facing)
        return BalanceDecision(BalanceMode.STEP, (0.0, 0.0, 0.0), plan, rest)

    if walking:
        dwell_over = state.sim_time_s - gait.last_exchange_s >= gait.dwell_s
        pivot, _ = _stance_and_height(state, params)
        ahead = dot2(sub2(com_g, ground(state.legs[pivot].foot_anchor)), config.target_direction)
        launch = gait.started or speed >= gait.start_speed_mps or ahead >= gait.lead_offset_m
        if dwell_over and launch:
            plan = plan_gait_step(state, ctx, terrain, config, params, gait, facing)
            return BalanceDecision(BalanceMode.STEP, (0.0, 0.0, 0.0), plan, rest)

    if (
        not walking
        and speed < config.quiescent_speed_mps
        and cls.label is RegionLabel.INNER
        and len(stance_feet) == 2
    ):
        plan = comfort_check(state, foot_yaws_rad, config.target_direction, config)
        if plan is not None:
            return BalanceDecision(BalanceMode.COMFORT_STEP, (0.0, 0.0, 0.0), plan, rest)

    force = ankle_feedback(state, region, config, params)
    return BalanceDecision(BalanceMode.STAND_SWAY, force, None, rest)
