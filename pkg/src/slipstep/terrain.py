"""Ground models: flat, slope, stairs, heightfield, gaps, rotating platform.

All queries are pure. Only the rotating platform is time-dependent; every
other kind ignores t. Inside a gap there is no ground and height queries
return None; planners shrink the step toward the nearest ground instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

Vec2 = tuple[float, float]

MAX_PLATFORM_TILT_RAD = math.radians(45.0)


class NoGroundError(Exception):
    """The queried point lies inside a gap."""


class TerrainKind(Enum):
    FLAT = "flat"
    SLOPE = "slope"
    STAIRS = "stairs"
    HEIGHTFIELD = "heightfield"
    GAPS = "gaps"
    ROTATING_PLATFORM = "rotating_platform"
    TILTED_PLANE = "tilted_plane"


@dataclass(frozen=True)
class Terrain:
    """One ground model. Build via the class method constructors.

    Slopes and stairs vary along x only. The heightfield grid has its first
    sample at the origin and extends toward +x/+z; queries outside clamp to
    the border. Gaps repeat every gap_period_m along x with the void
    occupying the final gap_width_m of each period. The rotating platform
    tilts sinusoidally, alternating its tilt axis between x and z each
    period, switching exactly at the zero crossings so the surface never
    jumps.
    """

    kind: TerrainKind
    angle_rad: float = 0.0
    rise_m: float = 0.17
    run_m: float = 0.28
    grid_spacing_m: float = 1.0
    heights: tuple[tuple[float, ...], ...] = field(default=())
    gap_period_m: float = 1.0
    gap_width_m: float = 0.2
    max_tilt_rad: float = 0.0
    tilt_period_s: float = 20.0
    tilt_axis: str = "x"

    def __post_init__(self) -> None:
        if self.kind in (TerrainKind.SLOPE, TerrainKind.TILTED_PLANE):
            if abs(self.angle_rad) >= math.pi / 2:
                raise ValueError("slope angle must be within (-90, 90) degrees")
        if self.kind is TerrainKind.TILTED_PLANE and self.tilt_axis not in ("x", "z"):
            raise ValueError("tilt_axis must be 'x' or 'z'")
        if self.kind is TerrainKind.STAIRS and self.run_m <= 0.0:
            raise ValueError("stair run must be > 0")
        if self.kind is TerrainKind.HEIGHTFIELD:
            if self.grid_spacing_m <= 0.0:
                raise ValueError("grid spacing must be > 0")
            if len(self.heights) < 2 or any(len(row) < 2 for row in self.heights):
                raise ValueError("heightfield needs at least a 2x2 grid")
            if any(len(row) != len(self.heights[0]) for row in self.heights):
                raise ValueError("heightfield rows must have equal length")
            for row in self.heights:
                for h in row:
                    if not math.isfinite(h):
                        raise ValueError("heightfield heights must be finite")
        if self.kind is TerrainKind.GAPS:
            if self.gap_period_m <= 0.0:
                raise ValueError("gap period must be > 0")
            if not 0.0 < self.gap_width_m < self.gap_period_m:
                raise ValueError("gap width must be in (0, period)")
        if self.kind is TerrainKind.ROTATING_PLATFORM:
            if not 0.0 <= self.max_tilt_rad <= MAX_PLATFORM_TILT_RAD + 1e-12:
                raise ValueError("platform tilt must be within [0, 45] degrees")
            if self.tilt_period_s <= 0.0:
                raise ValueError("platform period must be > 0")

    @classmethod
    def flat(cls) -> "Terrain":
        return cls(kind=TerrainKind.FLAT)

    @classmethod
    def slope(cls, angle_rad: float) -> "Terrain":
        return cls(kind=TerrainKind.SLOPE, angle_rad=angle_rad)

    @classmethod
    def stairs(cls, rise_m: float = 0.17, run_m: float = 0.28) -> "Terrain":
        return cls(kind=TerrainKind.STAIRS, rise_m=rise_m, run_m=run_m)

    @classmethod
    def heightfield(cls, grid_spacing_m: float, heights) -> "Terrain":
        rows = tuple(tuple(float(h) for h in row) for row in heights)
        return cls(kind=TerrainKind.HEIGHTFIELD, grid_spacing_m=grid_spacing_m, heights=rows)

    @classmethod
    def gaps(cls, period_m: float = 1.0, gap_width_m: float = 0.2) -> "Terrain":
        return cls(kind=TerrainKind.GAPS, gap_period_m=period_m, gap_width_m=gap_width_m)

    @classmethod
    def rotating_platform(
        cls, max_tilt_rad: float, period_s: float = 20.0
    ) -> "Terrain":
        return cls(
            kind=TerrainKind.ROTATING_PLATFORM,
            max_tilt_rad=max_tilt_rad,
            tilt_period_s=period_s,
        )

    @classmethod
    def tilted_plane(cls, angle_rad: float, axis: str = "x") -> "Terrain":
        """Fixed plane graded along one horizontal axis (held platform tilt)."""
        return cls(kind=TerrainKind.TILTED_PLANE, angle_rad=angle_rad, tilt_axis=axis)


def platform_tilt(terrain: Terrain, t: float) -> tuple[float, str]:
    """Current (tilt angle, axis name) of a rotating platform.

    The angle follows max_tilt * sin(2*pi*t/period); the axis is "x" on even
    periods and "z" on odd ones, so switches land on the sin zero crossings.
    """
    if terrain.kind is not TerrainKind.ROTATING_PLATFORM:
        raise ValueError("not a rotating platform")
    cycle = math.floor(t / terrain.tilt_period_s)
    phase = 2.0 * math.pi * (t / terrain.tilt_period_s - cycle)
    angle = terrain.max_tilt_rad * math.sin(phase)
    axis = "x" if cycle % 2 == 0 else "z"
    return angle, axis


def _tilted_plane_height(x: float, z: float, angle_rad: float, axis: str) -> float:
    coord = x if axis == "x" else z
    return math.tan(angle_rad) * coord


def height_at(terrain: Terrain, x: float, z: float, t: float = 0.0) -> float | None:
    """Ground height under (x, z) at time t, or None inside a gap."""
    if not (math.isfinite(x) and math.isfinite(z) and math.isfinite(t)):
        raise ValueError("coordinates must be finite")
    kind = terrain.kind
    if kind is TerrainKind.FLAT:
        return 0.0
    if kind is TerrainKind.SLOPE:
        return math.tan(terrain.angle_rad) * x
    if kind is TerrainKind.STAIRS:
        return terrain.rise_m * math.floor(x / terrain.run_m)
    if kind is TerrainKind.HEIGHTFIELD:
        return _bilinear(terrain, x, z)
    if kind is TerrainKind.GAPS:
        offset = x % terrain.gap_period_m
        if offset >= terrain.gap_period_m - terrain.gap_width_m:
            return None
        return 0.0
    if kind is TerrainKind.ROTATING_PLATFORM:
        angle, axis = platform_tilt(terrain, t)
        return _tilted_plane_height(x, z, angle, axis)
    if kind is TerrainKind.TILTED_PLANE:
        return _tilted_plane_height(x, z, terrain.angle_rad, terrain.tilt_axis)
    raise ValueError(f"unhandled terrain kind {kind}")


def _bilinear(terrain: Terrain, x: float, z: float) -> float:
    rows = terrain.heights
    nx = len(rows)
    nz = len(rows[0])
    gx = min(max(x / terrain.grid_spacing_m, 0.0), nx - 1.0)
    gz = min(max(z / terrain.grid_spacing_m, 0.0), nz - 1.0)
    i0 = min(int(gx), nx - 2)
    j0 = min(int(gz), nz - 2)
    fx = gx - i0
    fz = gz - j0
    h00 = rows[i0][j0]
    h10 = rows[i0 + 1][j0]
    h01 = rows[i0][j0 + 1]
    h11 = rows[i0 + 1][j0 + 1]
    return (
        h00 * (1 - fx) * (1 - fz)
        + h10 * fx * (1 - fz)
        + h01 * (1 - fx) * fz
        + h11 * fx * fz
    )


def terrain_offset_for_step(
    terrain: Terrain, from_xz: Vec2, to_xz: Vec2, t: float = 0.0
) -> float:
    """Height difference height(to) - height(from) fed into step planning.

    Raises NoGroundError when either end lies in a gap; the planner then
    retargets via nearest_ground.
    """
    h_from = height_at(terrain, from_xz[0], from_xz[1], t)
    h_to = height_at(terrain, to_xz[0], to_xz[1], t)
    if h_from is None:
        raise NoGroundError(f"no ground under start {from_xz}")
    if h_to is None:
        raise NoGroundError(f"no ground under target {to_xz}")
    return h_to - h_from


def nearest_ground(
    terrain: Terrain,
    from_xz: Vec2,
    to_xz: Vec2,
    t: float = 0.0,
    margin_m: float = 0.02,
) -> Vec2:
    """Pull an off-ground target back along the segment until it has ground.

    from_xz must be on ground. Returns the farthest on-ground point toward
    to_xz, backed off by margin_m of segment length. Scan plus bisection;
    resolution is fine enough for the gap widths used here.
    """
    if height_at(terrain, from_xz[0], from_xz[1], t) is None:
        raise NoGroundError(f"no ground under start {from_xz}")

    def on_ground(s: float) -> bool:
        px = from_xz[0] + (to_xz[0] - from_xz[0]) * s
        pz = from_xz[1] + (to_xz[1] - from_xz[1]) * s
        return height_at(terrain, px, pz, t) is not None

    if on_ground(1.0):
        return to_xz
    samples = 128
    lo = 0.0
    for i in range(samples, -1, -1):
        s = i / samples
        if on_ground(s):
            lo = s
            break
    hi = min(lo + 1.0 / samples, 1.0)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if on_ground(mid):
            lo = mid
        else:
            hi = mid
    s = max(0.0, lo - margin_m)
    return (
        from_xz[0] + (to_xz[0] - from_xz[0]) * s,
        from_xz[1] + (to_xz[1] - from_xz[1]) * s,
    )


def terrain_from_config(config: dict) -> Terrain:
    """Build a Terrain from its scenario-file description.

    Angles arrive in degrees; everything else in meters/seconds.
    """
    if "kind" not in config:
        raise ValueError("terrain config needs a 'kind'")
    kind = str(config["kind"]).lower()
    if kind == "flat":
        return Terrain.flat()
    if kind == "slope":
        return Terrain.slope(math.radians(float(config["angle_deg"])))
    if kind == "stairs":
        return Terrain.stairs(
            rise_m=float(config.get("rise_m", 0.17)),
            run_m=float(config.get("run_m", 0.28)),
        )
    if kind == "heightfield":
        return Terrain.heightfield(
            grid_spacing_m=float(config["grid_spacing_m"]),
            heights=config["heights"],
        )
    if kind == "gaps":
        return Terrain.gaps(
            period_m=float(config.get("period_m", 1.0)),
            gap_width_m=float(config.get("gap_width_m", 0.2)),
        )
    if kind == "rotating_platform":
        return Terrain.rotating_platform(
            max_tilt_rad=math.radians(float(config.get("max_tilt_deg", 45.0))),
            period_s=float(config.get("period_s", 20.0)),
        )
    if kind == "tilted_plane":
        return Terrain.tilted_plane(
            math.radians(float(config["angle_deg"])),
            axis=str(config.get("axis", "x")),
        )
    raise ValueError(f"unknown terrain kind '{config['kind']}'")


def terrain_to_config(terrain: Terrain) -> dict:
    """Inverse of terrain_from_config, for writing scenario files."""
    kind = terrain.kind
    if kind is TerrainKind.FLAT:
        return {"kind": "flat"}
    if kind is TerrainKind.SLOPE:
        return {"kind": "slope", "angle_deg": math.degrees(terrain.angle_rad)}
    if kind is TerrainKind.STAIRS:
        return {"kind": "stairs", "rise_m": terrain.rise_m, "run_m": terrain.run_m}
    if kind is TerrainKind.HEIGHTFIELD:
        return {
            "kind": "heightfield",
            "grid_spacing_m": terrain.grid_spacing_m,
            "heights": [list(row) for row in terrain.heights],
        }
    if kind is TerrainKind.GAPS:
        return {
            "kind": "gaps",
            "period_m": terrain.gap_period_m,
            "gap_width_m": terrain.gap_width_m,
        }
    if kind is TerrainKind.ROTATING_PLATFORM:
        return {
            "kind": "rotating_platform",
            "max_tilt_deg": math.degrees(terrain.max_tilt_rad),
            "period_s": terrain.tilt_period_s,
        }
    if kind is TerrainKind.TILTED_PLANE:
        return {
            "kind": "tilted_plane",
            "angle_deg": math.degrees(terrain.angle_rad),
            "axis": terrain.tilt_axis,
        }
    raise ValueError(f"unhandled terrain kind {kind}")
