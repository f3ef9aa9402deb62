"""Scenario files: what to run, on what ground, with which disturbances.

File format (JSON):

    {
      "schema_version": 1,
      "name": "flat-walk",
      "rng_seed": 42,
      "duration_s": 20.0,
      "terrain": {"kind": "flat"},
      "controller": {"target_speed_mps": 1.0, "target_direction": [1, 0]},
      "slip": {"mass_kg": 89.5},
      "schedule": [
        {"time_s": 5.0, "kind": "PUSH", "force_n": [400, 0, 0], "duration_s": 0.2},
        {"time_s": 6.0, "kind": "BALL", "radius_m": 0.1, "density_kgpm3": 50,
         "velocity_mps": [-10, 0, 0], "origin_m": [4, 1.2, 0]},
        {"time_s": 8.0, "kind": "SET_TARGET", "speed_mps": 0.5, "direction": [1, 0]},
        {"time_s": 9.0, "kind": "SET_BOX_MASS", "mass_kg": 10.0},
        {"time_s": 10.0, "kind": "SET_LEG_SCALE", "factor": 0.8}
      ]
    }

"controller" and "slip" sections are optional field-by-field overrides of
the dataclass defaults. The schedule must be sorted by time. Randomized
packs (push-storm, ball-storm) are generated up front from rng_seed, so a
scenario is a pure value: the run itself draws no randomness.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, fields, replace
from typing import Union

from .balance import ControllerConfig
from .slip import SlipParams
from .terrain import Terrain, terrain_from_config, terrain_to_config
from .vec import Vec3, norm, normalize2, scale

SCHEMA_VERSION = 1
PUSH_FORCE_SANITY_N = 2000.0
BALL_RESTITUTION = 0.3
BALL_CONTACT_WINDOW_S = 0.05
TORSO_CAPSULE_RADIUS_M = 0.25
TORSO_CAPSULE_HALF_HEIGHT_M = 0.25


class ScenarioError(ValueError):
    """Raised for schema or value problems in a scenario description."""


@dataclass(frozen=True)
class PushDisturbance:
    time_s: float
    force_n: Vec3
    duration_s: float

    kind = "PUSH"


@dataclass(frozen=True)
class BallDisturbance:
    """A thrown sphere, reduced at launch time to an equivalent push."""

    time_s: float
    radius_m: float
    density_kgpm3: float
    velocity_mps: Vec3
    origin_m: Vec3

    kind = "BALL"

    @property
    def mass_kg(self) -> float:
        return self.density_kgpm3 * (4.0 / 3.0) * math.pi * self.radius_m**3


@dataclass(frozen=True)
class SetTarget:
    time_s: float
    speed_mps: float
    direction: tuple[float, float]

    kind = "SET_TARGET"


@dataclass(frozen=True)
class SetBoxMass:
    time_s: float
    mass_kg: float

    kind = "SET_BOX_MASS"


@dataclass(frozen=True)
class SetLegScale:
    time_s: float
    factor: float

    kind = "SET_LEG_SCALE"


ScheduleEntry = Union[PushDisturbance, BallDisturbance, SetTarget, SetBoxMass, SetLegScale]


@dataclass(frozen=True)
class Scenario:
    name: str
    terrain: Terrain
    controller: ControllerConfig
    slip: SlipParams
    duration_s: float
    schedule: tuple[ScheduleEntry, ...]
    rng_seed: int

    def __post_init__(self) -> None:
        if self.duration_s < 0.0:
            raise ScenarioError("duration_s must be >= 0")
        last = float("-inf")
        for entry in self.schedule:
            if entry.time_s < last:
                raise ScenarioError("schedule must be sorted by time")
            last = entry.time_s
            if isinstance(entry, PushDisturbance):
                mag = norm(entry.force_n)
                if not 0.0 <= mag <= PUSH_FORCE_SANITY_N:
                    raise ScenarioError(
                        f"push magnitude {mag:.1f} N outside [0, {PUSH_FORCE_SANITY_N:.0f}]"
                    )
                if entry.duration_s <= 0.0:
                    raise ScenarioError("push duration must be > 0")
            elif isinstance(entry, BallDisturbance):
                if entry.radius_m <= 0.0 or entry.density_kgpm3 <= 0.0:
                    raise ScenarioError("ball radius and density must be > 0")
            elif isinstance(entry, SetTarget):
                if entry.speed_mps < 0.0:
                    raise ScenarioError("target speed must be >= 0")
            elif isinstance(entry, SetLegScale):
                if entry.factor <= 0.0:
                    raise ScenarioError("leg scale must be > 0")
            elif isinstance(entry, SetBoxMass):
                if entry.mass_kg < 0.0:
                    raise ScenarioError("box mass must be >= 0")


def ball_to_impulse(
    ball: BallDisturbance, torso_base: Vec3
) -> PushDisturbance | None:
    """Reduce a thrown ball to the push it lands on the torso, or None.

    Straight-line flight from the launch-time state: closest approach of
    the ball's path to the torso capsule axis (a vertical segment above the
    COM). A hit converts the inelastic collision impulse m*(1+e)*speed into
    a constant force over a short contact window starting at impact time.
    Misses stay misses even if the character later wanders into the path.
    """
    speed = norm(ball.velocity_mps)
    if speed <= 0.0:
        return None
    d = scale(ball.velocity_mps, 1.0 / speed)
    seg_lo = torso_base[1]
    seg_hi = torso_base[1] + 2.0 * TORSO_CAPSULE_HALF_HEIGHT_M
    best: tuple[float, float] | None = None
    # sample the flight densely; fine for scenario setup, not a hot path
    reach = norm((ball.origin_m[0] - torso_base[0], 0.0, ball.origin_m[2] - torso_base[2]))
    horizon = (reach + 2.0) / speed
    steps = 400
    for i in range(steps + 1):
        t = horizon * i / steps
        px = ball.origin_m[0] + d[0] * speed * t
        py = ball.origin_m[1] + d[1] * speed * t
        pz = ball.origin_m[2] + d[2] * speed * t
        cy = min(max(py, seg_lo), seg_hi)
        dist = math.sqrt((px - torso_base[0]) ** 2 + (py - cy) ** 2 + (pz - torso_base[2]) ** 2)
        if best is None or dist < best[1]:
            best = (t, dist)
    if best is None or best[1] > TORSO_CAPSULE_RADIUS_M + ball.radius_m:
        return None
    impact_t = ball.time_s + best[0]
    impulse = ball.mass_kg * (1.0 + BALL_RESTITUTION) * speed
    force = scale(d, impulse / BALL_CONTACT_WINDOW_S)
    return PushDisturbance(time_s=impact_t, force_n=force, duration_s=BALL_CONTACT_WINDOW_S)


def _entry_to_dict(entry: ScheduleEntry) -> dict:
    if isinstance(entry, PushDisturbance):
        return {
            "time_s": entry.time_s,
            "kind": "PUSH",
            "force_n": list(entry.force_n),
            "duration_s": entry.duration_s,
        }
    if isinstance(entry, BallDisturbance):
        return {
            "time_s": entry.time_s,
            "kind": "BALL",
            "radius_m": entry.radius_m,
            "density_kgpm3": entry.density_kgpm3,
            "velocity_mps": list(entry.velocity_mps),
            "origin_m": list(entry.origin_m),
        }
    if isinstance(entry, SetTarget):
        return {
            "time_s": entry.time_s,
            "kind": "SET_TARGET",
            "speed_mps": entry.speed_mps,
            "direction": list(entry.direction),
        }
    if isinstance(entry, SetBoxMass):
        return {"time_s": entry.time_s, "kind": "SET_BOX_MASS", "mass_kg": entry.mass_kg}
    if isinstance(entry, SetLegScale):
        return {"time_s": entry.time_s, "kind": "SET_LEG_SCALE", "factor": entry.factor}
    raise ScenarioError(f"unknown schedule entry {entry!r}")


def _entry_from_dict(raw: dict) -> ScheduleEntry:
    try:
        kind = str(raw["kind"]).upper()
        t = float(raw["time_s"])
        if kind == "PUSH":
            fx, fy, fz = (float(v) for v in raw["force_n"])
            return PushDisturbance(t, (fx, fy, fz), float(raw["duration_s"]))
        if kind == "BALL":
            vx, vy, vz = (float(v) for v in raw["velocity_mps"])
            ox, oy, oz = (float(v) for v in raw["origin_m"])
            return BallDisturbance(
                t,
                float(raw["radius_m"]),
                float(raw.get("density_kgpm3", 50.0)),
                (vx, vy, vz),
                (ox, oy, oz),
            )
        if kind == "SET_TARGET":
            dx, dz = (float(v) for v in raw["direction"])
            return SetTarget(t, float(raw["speed_mps"]), normalize2((dx, dz)))
        if kind == "SET_BOX_MASS":
            return SetBoxMass(t, float(raw["mass_kg"]))
        if kind == "SET_LEG_SCALE":
            return SetLegScale(t, float(raw["factor"]))
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad schedule entry {raw!r}: {exc}") from exc
    raise ScenarioError(f"unknown schedule kind {raw.get('kind')!r}")


_CONTROLLER_FIELDS = {f.name for f in fields(ControllerConfig)}
_SLIP_FIELDS = {f.name for f in fields(SlipParams)}


def _controller_from_dict(raw: dict) -> ControllerConfig:
    unknown = set(raw) - _CONTROLLER_FIELDS
    if unknown:
        raise ScenarioError(f"unknown controller fields: {sorted(unknown)}")
    kwargs = dict(raw)
    if "target_direction" in kwargs:
        dx, dz = (float(v) for v in kwargs["target_direction"])
        kwargs["target_direction"] = normalize2((dx, dz))
    try:
        return ControllerConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad controller config: {exc}") from exc


def _slip_from_dict(raw: dict) -> SlipParams:
    unknown = set(raw) - _SLIP_FIELDS
    if unknown:
        raise ScenarioError(f"unknown slip fields: {sorted(unknown)}")
    try:
        return SlipParams(**{k: float(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad slip params: {exc}") from exc


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    unknown = set(raw) - {
        "schema_version", "name", "rng_seed", "duration_s",
        "terrain", "controller", "slip", "schedule",
    }
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
    try:
        name = str(raw["name"])
        duration = float(raw["duration_s"])
        seed = int(raw.get("rng_seed", 0))
        terrain = terrain_from_config(raw.get("terrain", {"kind": "flat"}))
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario: {exc}") from exc
    controller = _controller_from_dict(raw.get("controller", {}))
    slip = _slip_from_dict(raw.get("slip", {}))
    schedule = tuple(_entry_from_dict(e) for e in raw.get("schedule", []))
    return Scenario(
        name=name,
        terrain=terrain,
        controller=controller,
        slip=slip,
        duration_s=duration,
        schedule=schedule,
        rng_seed=seed,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    controller: dict = {
        "target_speed_mps": scenario.controller.target_speed_mps,
        "target_direction": list(scenario.controller.target_direction),
    }
    defaults = ControllerConfig()
    for f in fields(ControllerConfig):
        if f.name in controller:
            continue
        value = getattr(scenario.controller, f.name)
        if value != getattr(defaults, f.name):
            controller[f.name] = value
    slip_defaults = SlipParams()
    slip = {
        f.name: getattr(scenario.slip, f.name)
        for f in fields(SlipParams)
        if getattr(scenario.slip, f.name) != getattr(slip_defaults, f.name)
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "rng_seed": scenario.rng_seed,
        "duration_s": scenario.duration_s,
        "terrain": terrain_to_config(scenario.terrain),
        "controller": controller,
        "slip": slip,
        "schedule": [_entry_to_dict(e) for e in scenario.schedule],
    }


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(raw)


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def push_storm_schedule(
    seed: int, duration_s: float, count: int = 12
) -> tuple[PushDisturbance, ...]:
    """Randomized horizontal pushes: times uniform over the run, direction
    uniform on the circle, magnitude U(10, 500) N, duration U(0.1, 0.5) s."""
    rng = random.Random(seed)
    times = sorted(rng.uniform(1.0, max(1.0, duration_s - 1.0)) for _ in range(count))
    out = []
    for t in times:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        mag = rng.uniform(10.0, 500.0)
        dur = rng.uniform(0.1, 0.5)
        out.append(
            PushDisturbance(t, (mag * math.cos(angle), 0.0, mag * math.sin(angle)), dur)
        )
    return tuple(out)


def ball_storm_schedule(
    seed: int,
    duration_s: float,
    count: int = 10,
    torso_height_m: float = 1.1,
) -> tuple[BallDisturbance, ...]:
    """Randomized thrown spheres aimed at the torso from around the circle."""
    rng = random.Random(seed)
    times = sorted(rng.uniform(1.0, max(1.0, duration_s - 1.0)) for _ in range(count))
    out = []
    for t in times:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        radius = rng.uniform(0.08, 0.15)
        speed = rng.uniform(5.0, 15.0)
        dist = rng.uniform(2.0, 4.0)
        dirx, dirz = math.cos(angle), math.sin(angle)
        origin = (dist * dirx, torso_height_m, dist * dirz)
        velocity = (-dirx * speed, 0.0, -dirz * speed)
        out.append(BallDisturbance(t, radius, 50.0, velocity, origin))
    return tuple(out)


def _base(name: str, **kw) -> Scenario:
    defaults = dict(
        terrain=Terrain.flat(),
        controller=ControllerConfig(),
        slip=SlipParams(),
        duration_s=20.0,
        schedule=(),
        rng_seed=42,
    )
    defaults.update(kw)
    return Scenario(name=name, **defaults)


def builtin_scenarios() -> dict[str, Scenario]:
    """The built-in pack, one entry per canonical experiment."""
    walk = ControllerConfig(target_speed_mps=1.0)
    pack = {
        "flat-walk": _base("flat-walk", controller=walk, duration_s=20.0),
        # a 25 degree grade is a 47% climb; the gait holds speed on it at
        # a hiking pace, not at the flat-ground pace
        "slope-25": _base(
            "slope-25",
            terrain=Terrain.slope(math.radians(25.0)),
            controller=ControllerConfig(target_speed_mps=0.5),
            duration_s=20.0,
        ),
        "stairs": _base(
            "stairs",
            terrain=Terrain.stairs(0.17, 0.28),
            controller=ControllerConfig(target_speed_mps=0.8),
            duration_s=15.0,
        ),
        "gaps-0.2": _base(
            "gaps-0.2",
            terrain=Terrain.gaps(1.0, 0.2),
            controller=ControllerConfig(target_speed_mps=0.8),
            duration_s=15.0,
        ),
        "push-storm": _base(
            "push-storm",
            duration_s=30.0,
            schedule=push_storm_schedule(42, 30.0),
        ),
        "ball-storm": _base(
            "ball-storm",
            duration_s=30.0,
            schedule=ball_storm_schedule(42, 30.0),
        ),
        "rotating-platform-45": _base(
            "rotating-platform-45",
            terrain=Terrain.rotating_platform(math.radians(45.0), 20.0),
            duration_s=60.0,
            schedule=tuple(
                PushDisturbance(t, (100.0 * sx, 0.0, 100.0 * sz), 0.2)
                for t, sx, sz in (
                    (12.0, 1.0, 0.0),
                    (24.0, 0.0, 1.0),
                    (36.0, -1.0, 0.0),
                    (48.0, 0.0, -1.0),
                )
            ),
        ),
        "box-hold": _base(
            "box-hold",
            duration_s=20.0,
            schedule=(
                SetBoxMass(2.0, 5.0),
                SetBoxMass(8.0, 15.0),
                SetBoxMass(14.0, 0.0),
            ),
        ),
        "leg-morph": _base(
            "leg-morph",
            controller=ControllerConfig(target_speed_mps=0.8),
            duration_s=24.0,
            schedule=(
                SetLegScale(8.0, 0.8),
                SetLegScale(16.0, 1.1),
            ),
        ),
        "crouch-walk": _base(
            "crouch-walk",
            controller=ControllerConfig(target_speed_mps=0.6),
            duration_s=15.0,
            schedule=(SetLegScale(0.0, 0.72),),
        ),
    }
    return pack


def get_scenario(name_or_path: str) -> Scenario:
    """Resolve a built-in name or load a scenario file."""
    pack = builtin_scenarios()
    if name_or_path in pack:
        return pack[name_or_path]
    return load_scenario(name_or_path)


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    """Re-seed a scenario; regenerates the randomized packs' schedules."""
    if seed == scenario.rng_seed:
        return scenario
    out = replace(scenario, rng_seed=seed)
    if scenario.name == "push-storm":
        out = replace(out, schedule=push_storm_schedule(seed, scenario.duration_s))
    elif scenario.name == "ball-storm":
        out = replace(out, schedule=ball_storm_schedule(seed, scenario.duration_s))
    return out
