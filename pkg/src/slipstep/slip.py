"""Spring-loaded inverted-pendulum dynamics and closed-form stepping math.

The whole character reduces to a point mass riding on one or two
spring-damper legs. Everything here is a pure function over value-like
state: the simulation loop owns the only mutable copy and advances it
exclusively through integrate()/exchange_support().
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .vec import Vec3, add, dot, is_finite, norm, scale, sub


class SlipError(Exception):
    """Base class for model-domain failures."""


class StepDomainError(SlipError):
    """Requested terrain step is unreachable with the current energy."""


class DegenerateLegError(SlipError):
    """Leg geometry collapsed (zero length or perpendicular to gravity)."""


class PlacementError(SlipError):
    """Planned foot target is not on the terrain surface."""


class NumericError(SlipError):
    """A non-finite quantity entered the integrator."""


@dataclass
class SlipParams:
    """Point-mass and leg-spring constants.

    Spring/damping defaults are hand-tuned documented values, not measured
    ones. step_bias_gain scales the pull/push step bias; spring_error_gain
    scales the leg-compression step bias.
    """

    mass_kg: float = 89.5
    gravity_mps2: float = 9.81
    rest_length_m: float = 0.9
    spring_k: float = 12000.0
    damping_k: float = 700.0
    step_bias_gain: float = 0.4
    spring_error_gain: float = 0.5

    def __post_init__(self) -> None:
        if self.mass_kg <= 0.0:
            raise ValueError("mass_kg must be > 0")
        if self.gravity_mps2 <= 0.0:
            raise ValueError("gravity_mps2 must be > 0")
        if self.rest_length_m <= 0.0:
            raise ValueError("rest_length_m must be > 0")
        if self.spring_k <= 0.0:
            raise ValueError("spring_k must be > 0")
        if self.damping_k < 0.0:
            raise ValueError("damping_k must be >= 0")

    @property
    def weight_n(self) -> float:
        return self.mass_kg * self.gravity_mps2


@dataclass
class LegRecord:
    foot_anchor: Vec3
    current_rest_length_m: float
    is_stance: bool

    def __post_init__(self) -> None:
        if self.current_rest_length_m <= 0.0:
            raise ValueError("current_rest_length_m must be > 0")


@dataclass
class SlipState:
    """Point-mass COM plus both leg records. Advance only via integrate()."""

    com_position: Vec3
    com_velocity: Vec3
    legs: tuple[LegRecord, LegRecord]
    sim_time_s: float = 0.0

    def stance_indices(self) -> list[int]:
        return [i for i, leg in enumerate(self.legs) if leg.is_stance]

    def leg_length(self, index: int) -> float:
        return norm(sub(self.com_position, self.legs[index].foot_anchor))


@dataclass
class PullContext:
    """External force decomposition feeding the halt/bias laws.

    up_unit is world up, leg_axis_unit points from the stance anchor to the
    COM, force_axis_unit is the direction the external force is resolved
    along (the intended travel direction when steering).
    """

    external_force_n: Vec3
    gravity_force_n: Vec3
    up_unit: Vec3 = (0.0, 1.0, 0.0)
    leg_axis_unit: Vec3 = (0.0, 1.0, 0.0)
    force_axis_unit: Vec3 = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("up_unit", "leg_axis_unit", "force_axis_unit"):
            v = getattr(self, name)
            if abs(norm(v) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be unit length")

    @classmethod
    def still(cls, params: SlipParams) -> "PullContext":
        return cls(
            external_force_n=(0.0, 0.0, 0.0),
            gravity_force_n=(0.0, -params.weight_n, 0.0),
        )


@dataclass
class StepPlan:
    base_distance_m: float
    biased_distance_m: float
    bias_factor: float
    target_foot_position: Vec3
    swing_leg_index: int
    target_yaw_rad: float = 0.0
    kind: str = "corrective"

    def __post_init__(self) -> None:
        if self.base_distance_m < 0.0:
            raise ValueError("base_distance_m must be >= 0")
        if self.biased_distance_m < 0.0:
            raise ValueError("biased_distance_m must be >= 0")
        if self.swing_leg_index not in (0, 1):
            raise ValueError("swing_leg_index must be 0 or 1")


def total_energy(state: SlipState, params: SlipParams, datum_height_m: float = 0.0) -> float:
    """Mechanical energy m*g*h + 0.5*m*|v|^2 above the terrain datum."""
    h = state.com_position[1] - datum_height_m
    v2 = dot(state.com_velocity, state.com_velocity)
    return params.mass_kg * params.gravity_mps2 * h + 0.5 * params.mass_kg * v2


def step_distance(speed_mps: float, com_height_m: float, terrain_offset_m: float, gravity: float) -> float:
    """Vault length that brings the pendulum to rest at apex.

    Closed form of the pre/post-step energy balance with the post-step apex
    at rest, including the terrain height offset to the landing point.
    """
    if speed_mps < 0.0:
        raise ValueError("speed must be >= 0")
    if gravity <= 0.0:
        raise ValueError("gravity must be > 0")
    disc = speed_mps * speed_mps + 4.0 * gravity * (com_height_m - terrain_offset_m)
    if disc < 0.0:
        raise StepDomainError(
            f"terrain step too large for current energy (discriminant {disc:.6g})"
        )
    return (speed_mps / (2.0 * gravity)) * math.sqrt(disc)


def regulated_step_distance(
    speed_mps: float, apex_speed_mps: float, com_height_m: float, gravity: float
) -> float:
    """Vault length leaving apex_speed at the apex instead of rest.

    Same energy balance as step_distance with a nonzero post-vault speed;
    reduces to step_distance when apex_speed is 0. Returns 0 when the
    requested apex speed exceeds what the current energy allows (the foot
    then lands under the COM and the vault sheds nothing).
    """
    if speed_mps < 0.0:
        raise ValueError("speed must be >= 0")
    if gravity <= 0.0:
        raise ValueError("gravity must be > 0")
    radius = (speed_mps * speed_mps - apex_speed_mps * apex_speed_mps) / (2.0 * gravity) + com_height_m
    if radius <= com_height_m:
        return 0.0
    return math.sqrt(radius * radius - com_height_m * com_height_m)


def halt_condition(ctx: PullContext) -> bool:
    """True when gravity alignment dominates the external force (may halt)."""
    grav_term = dot(ctx.up_unit, ctx.leg_axis_unit) * norm(ctx.gravity_force_n)
    pull_term = dot(ctx.force_axis_unit, ctx.external_force_n)
    return grav_term >= pull_term


def pull_bias(ctx: PullContext, base_d: float, params: SlipParams) -> tuple[float, float]:
    """Bias factor and biased step distance under an external pull/push.

    Returns (beta, d_prime) where d_prime = base_d + beta * step_bias_gain.
    A pull along the travel axis lengthens the step, an opposing push
    shortens it.
    """
    denom = dot(ctx.up_unit, ctx.leg_axis_unit) * norm(ctx.gravity_force_n)
    if denom <= 0.0:
        raise DegenerateLegError("leg axis perpendicular to gravity (fallen)")
    beta = dot(ctx.force_axis_unit, ctx.external_force_n) / denom
    return beta, base_d + beta * params.step_bias_gain


def spring_leg_force(leg: LegRecord, state: SlipState, params: SlipParams) -> Vec3:
    """Spring-damper force the stance leg applies to the COM.

    Acts along the anchor-to-COM axis: k_s times the rest-length displacement
    minus k_d times the radial COM velocity. Bilateral, matching the linear
    spring law (a stretched leg pulls; the model has no slack phase).
    """
    if not leg.is_stance:
        raise ValueError("spring force only defined for stance legs")
    axis = sub(state.com_position, leg.foot_anchor)
    length = norm(axis)
    if length < 1e-9:
        raise DegenerateLegError("zero-length leg")
    unit = scale(axis, 1.0 / length)
    compression = leg.current_rest_length_m - length
    radial_speed = dot(state.com_velocity, unit)
    magnitude = params.spring_k * compression - params.damping_k * radial_speed
    return scale(unit, magnitude)


def spring_error_bias(
    biased_d: float, stance_leg: LegRecord, state: SlipState, params: SlipParams
) -> float:
    """Step-distance correction for energy stored or lost in the leg spring.

    A compressed stance leg will release stored energy during the vault, so
    the step lengthens to shed it; a stretched leg shortens it.
    """
    current_length = norm(sub(state.com_position, stance_leg.foot_anchor))
    error = stance_leg.current_rest_length_m - current_length
    return biased_d + params.spring_error_gain * error


def integrate(
    state: SlipState,
    external_force_n: Vec3,
    ankle_force_n: Vec3,
    params: SlipParams,
    dt: float,
) -> SlipState:
    """Semi-implicit (symplectic) step: velocity first, then position."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if not (is_finite(external_force_n) and is_finite(ankle_force_n)):
        raise NumericError("non-finite force input")
    fx, fy, fz = external_force_n
    fy -= params.weight_n
    fx += ankle_force_n[0]
    fy += ankle_force_n[1]
    fz += ankle_force_n[2]
    for i in state.stance_indices():
        sfx, sfy, sfz = spring_leg_force(state.legs[i], state, params)
        fx += sfx
        fy += sfy
        fz += sfz
    inv_m = 1.0 / params.mass_kg
    vel = (
        state.com_velocity[0] + fx * inv_m * dt,
        state.com_velocity[1] + fy * inv_m * dt,
        state.com_velocity[2] + fz * inv_m * dt,
    )
    pos = add(state.com_position, scale(vel, dt))
    if not (is_finite(vel) and is_finite(pos)):
        raise NumericError("integration produced non-finite state")
    return replace(state, com_position=pos, com_velocity=vel, sim_time_s=state.sim_time_s + dt)


def exchange_support(
    state: SlipState, plan: StepPlan, ground_height_m: float | None = None
) -> SlipState:
    """Instant stance/swing swap onto the planned target. COM is untouched."""
    if ground_height_m is not None and plan.target_foot_position[1] < ground_height_m - 1e-6:
        raise PlacementError(
            f"target {plan.target_foot_position} below terrain height {ground_height_m:.4f}"
        )
    new_idx = plan.swing_leg_index
    old_idx = 1 - new_idx
    new_stance = replace(
        state.legs[new_idx], foot_anchor=plan.target_foot_position, is_stance=True
    )
    new_swing = replace(state.legs[old_idx], is_stance=False)
    legs = (new_stance, new_swing) if new_idx == 0 else (new_swing, new_stance)
    return replace(state, legs=legs)
