"""Ground model tests against trigonometric and differencing oracles."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipstep.terrain import (
    NoGroundError,
    Terrain,
    TerrainKind,
    height_at,
    nearest_ground,
    platform_tilt,
    terrain_from_config,
    terrain_offset_for_step,
    terrain_to_config,
)


class TestTiltedPlane:
    def test_grade_along_each_axis(self):
        tx = Terrain.tilted_plane(math.radians(10.0), axis="x")
        tz = Terrain.tilted_plane(math.radians(10.0), axis="z")
        g = math.tan(math.radians(10.0))
        assert height_at(tx, 2.0, 7.0) == pytest.approx(2.0 * g)
        assert height_at(tz, 7.0, 2.0) == pytest.approx(2.0 * g)

    def test_time_invariant(self):
        t = Terrain.tilted_plane(math.radians(20.0))
        assert height_at(t, 1.0, 0.0, 0.0) == height_at(t, 1.0, 0.0, 99.0)

    def test_rejects_bad_axis(self):
        with pytest.raises(ValueError):
            Terrain.tilted_plane(0.1, axis="y")


class TestFlat:
    def test_zero_everywhere(self):
        t = Terrain.flat()
        for x, z in [(0, 0), (5.3, -2.1), (-100, 40)]:
            assert height_at(t, x, z) == 0.0

    def test_time_independent(self):
        t = Terrain.flat()
        assert height_at(t, 1.0, 1.0, 0.0) == height_at(t, 1.0, 1.0, 99.0)


class TestSlope:
    def test_twenty_five_degrees(self):
        t = Terrain.slope(math.radians(25.0))
        assert height_at(t, 1.0, 0.0) == pytest.approx(math.tan(math.radians(25.0)), rel=1e-12)
        assert height_at(t, 1.0, 0.0) == pytest.approx(0.4663, abs=5e-5)

    def test_downhill(self):
        t = Terrain.slope(math.radians(-25.0))
        assert height_at(t, 1.0, 0.0) == pytest.approx(-0.4663, abs=5e-5)

    def test_invariant_along_z(self):
        t = Terrain.slope(math.radians(10.0))
        assert height_at(t, 2.0, -5.0) == height_at(t, 2.0, 7.0)

    def test_vertical_rejected(self):
        with pytest.raises(ValueError):
            Terrain.slope(math.radians(90.0))


class TestStairs:
    def test_tread_heights(self):
        t = Terrain.stairs(rise_m=0.17, run_m=0.28)
        # oracle: floor(x / run) treads
        for x in (0.0, 0.1, 0.27):
            assert height_at(t, x, 0.0) == 0.0
        assert height_at(t, 0.29, 0.0) == pytest.approx(0.17)
        assert height_at(t, 0.57, 0.0) == pytest.approx(0.34)
        assert height_at(t, -0.1, 0.0) == pytest.approx(-0.17)

    @settings(max_examples=50, deadline=None)
    @given(x=st.floats(min_value=-5.0, max_value=5.0))
    def test_converges_to_slope(self, x):
        angle = math.radians(25.0)
        slope = Terrain.slope(angle)
        ratio = math.tan(angle)
        diffs = []
        for run in (0.28, 0.028, 0.0028):
            stairs = Terrain.stairs(rise_m=ratio * run, run_m=run)
            diffs.append(abs(height_at(stairs, x, 0.0) - height_at(slope, x, 0.0)))
        # each stairs height sits within one rise of the slope line
        for run, diff in zip((0.28, 0.028, 0.0028), diffs):
            assert diff <= ratio * run + 1e-12


class TestHeightfield:
    GRID = [
        [0.0, 0.1, 0.0],
        [0.2, 0.4, 0.2],
        [0.0, 0.1, 0.0],
    ]

    def test_corners_exact(self):
        t = Terrain.heightfield(0.5, self.GRID)
        assert height_at(t, 0.0, 0.0) == 0.0
        assert height_at(t, 0.5, 0.5) == pytest.approx(0.4)
        assert height_at(t, 1.0, 0.5) == pytest.approx(0.1)

    def test_cell_center_average(self):
        t = Terrain.heightfield(0.5, self.GRID)
        # oracle: bilinear at the cell center is the mean of its 4 corners
        expected = (0.0 + 0.1 + 0.2 + 0.4) / 4.0
        assert height_at(t, 0.25, 0.25) == pytest.approx(expected, rel=1e-12)

    def test_clamps_outside(self):
        t = Terrain.heightfield(0.5, self.GRID)
        assert height_at(t, -3.0, -3.0) == height_at(t, 0.0, 0.0)
        assert height_at(t, 50.0, 0.5) == height_at(t, 1.0, 0.5)

    def test_rejects_ragged_grid(self):
        with pytest.raises(ValueError):
            Terrain.heightfield(0.5, [[0.0, 0.1], [0.2]])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Terrain.heightfield(0.5, [[0.0, math.inf], [0.0, 0.0]])


class TestGaps:
    def test_gap_band_location(self):
        t = Terrain.gaps(period_m=1.0, gap_width_m=0.2)
        assert height_at(t, 0.5, 0.0) == 0.0
        assert height_at(t, 0.799, 0.0) == 0.0
        assert height_at(t, 0.85, 0.0) is None
        assert height_at(t, 0.999, 0.0) is None
        assert height_at(t, 1.0, 0.0) == 0.0
        assert height_at(t, 1.85, 3.0) is None

    def test_width_bounds(self):
        with pytest.raises(ValueError):
            Terrain.gaps(period_m=1.0, gap_width_m=1.0)


class TestRotatingPlatform:
    def test_level_at_start(self):
        t = Terrain.rotating_platform(math.radians(45.0), period_s=20.0)
        assert height_at(t, 1.0, 0.0, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_known_tilt_instant(self):
        max_tilt = math.radians(45.0)
        t = Terrain.rotating_platform(max_tilt, period_s=20.0)
        # solve sin(2*pi*t/20) = tan target: pick the instant where tilt is 10 deg
        target = math.radians(10.0)
        instant = 20.0 / (2 * math.pi) * math.asin(target / max_tilt)
        angle, axis = platform_tilt(t, instant)
        assert angle == pytest.approx(target, rel=1e-12)
        assert axis == "x"
        assert height_at(t, 1.0, 0.0, instant) == pytest.approx(math.tan(target), rel=1e-9)
        assert height_at(t, 0.0, 1.0, instant) == pytest.approx(0.0, abs=1e-12)

    def test_axis_alternates_with_period(self):
        t = Terrain.rotating_platform(math.radians(30.0), period_s=20.0)
        assert platform_tilt(t, 5.0)[1] == "x"
        assert platform_tilt(t, 25.0)[1] == "z"
        assert platform_tilt(t, 45.0)[1] == "x"

    @settings(max_examples=200, deadline=None)
    @given(time=st.floats(min_value=0.0, max_value=200.0))
    def test_tilt_never_exceeds_max(self, time):
        max_tilt = math.radians(45.0)
        t = Terrain.rotating_platform(max_tilt, period_s=20.0)
        angle, _ = platform_tilt(t, time)
        assert abs(angle) <= max_tilt + 1e-12

    def test_phase_continuous_at_axis_switch(self):
        t = Terrain.rotating_platform(math.radians(45.0), period_s=20.0)
        eps = 1e-6
        for boundary in (20.0, 40.0):
            before = height_at(t, 1.3, -0.7, boundary - eps)
            after = height_at(t, 1.3, -0.7, boundary + eps)
            assert before == pytest.approx(after, abs=1e-4)

    def test_max_tilt_capped(self):
        with pytest.raises(ValueError):
            Terrain.rotating_platform(math.radians(50.0))


class TestStepOffset:
    def test_flat_zero(self):
        assert terrain_offset_for_step(Terrain.flat(), (0.0, 0.0), (0.4, 0.0)) == 0.0

    def test_downhill_step(self):
        angle = math.radians(25.0)
        t = Terrain.slope(angle)
        dx = -0.2 / math.tan(angle)
        s = terrain_offset_for_step(t, (1.0, 0.0), (1.0 + dx, 0.0))
        assert s == pytest.approx(-0.2, rel=1e-12)

    def test_differencing_oracle(self):
        t = Terrain.stairs()
        a, b = (0.1, 0.0), (0.9, 0.0)
        expected = height_at(t, *b) - height_at(t, *a)
        assert terrain_offset_for_step(t, a, b) == pytest.approx(expected, rel=1e-12)

    def test_gap_target_raises(self):
        t = Terrain.gaps(period_m=1.0, gap_width_m=0.2)
        with pytest.raises(NoGroundError):
            terrain_offset_for_step(t, (0.5, 0.0), (0.85, 0.0))


class TestNearestGround:
    def test_on_ground_target_passes_through(self):
        t = Terrain.gaps()
        assert nearest_ground(t, (0.5, 0.0), (0.7, 0.0)) == (0.7, 0.0)

    def test_shrinks_out_of_gap(self):
        t = Terrain.gaps(period_m=1.0, gap_width_m=0.2)
        target = nearest_ground(t, (0.5, 0.0), (0.9, 0.0))
        assert height_at(t, target[0], target[1]) is not None
        assert 0.5 < target[0] <= 0.8
        # lands close behind the gap edge at x=0.8
        assert target[0] > 0.76

    def test_start_in_gap_rejected(self):
        t = Terrain.gaps(period_m=1.0, gap_width_m=0.2)
        with pytest.raises(NoGroundError):
            nearest_ground(t, (0.85, 0.0), (0.5, 0.0))


class TestConfigParsing:
    def test_round_trip_kinds(self):
        cases = [
            ({"kind": "flat"}, TerrainKind.FLAT),
            ({"kind": "slope", "angle_deg": 25}, TerrainKind.SLOPE),
            ({"kind": "stairs"}, TerrainKind.STAIRS),
            (
                {"kind": "heightfield", "grid_spacing_m": 0.5, "heights": [[0, 0], [0, 0.1]]},
                TerrainKind.HEIGHTFIELD,
            ),
            ({"kind": "gaps", "gap_width_m": 0.2}, TerrainKind.GAPS),
            ({"kind": "rotating_platform", "max_tilt_deg": 45}, TerrainKind.ROTATING_PLATFORM),
            ({"kind": "tilted_plane", "angle_deg": 30, "axis": "z"}, TerrainKind.TILTED_PLANE),
        ]
        for config, kind in cases:
            assert terrain_from_config(config).kind is kind

    def test_to_config_inverts(self):
        terrains = [
            Terrain.flat(),
            Terrain.slope(math.radians(25.0)),
            Terrain.stairs(0.15, 0.3),
            Terrain.heightfield(0.5, [[0, 0], [0, 0.2]]),
            Terrain.gaps(1.0, 0.2),
            Terrain.rotating_platform(math.radians(45.0), 20.0),
            Terrain.tilted_plane(math.radians(12.0), axis="z"),
        ]
        for t in terrains:
            back = terrain_from_config(terrain_to_config(t))
            assert back.kind is t.kind
            # angles pass through degrees in the file format, so allow 1 ulp
            assert back.angle_rad == pytest.approx(t.angle_rad, abs=1e-12)
            assert back.max_tilt_rad == pytest.approx(t.max_tilt_rad, abs=1e-12)
            for field in ("rise_m", "run_m", "grid_spacing_m", "heights",
                          "gap_period_m", "gap_width_m", "tilt_period_s", "tilt_axis"):
                assert getattr(back, field) == getattr(t, field)

    def test_slope_degrees_converted(self):
        t = terrain_from_config({"kind": "slope", "angle_deg": 25})
        assert t.angle_rad == pytest.approx(math.radians(25.0), rel=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            terrain_from_config({"kind": "lava"})

    def test_missing_kind(self):
        with pytest.raises(ValueError):
            terrain_from_config({})
