"""End-to-end acceptance checks, one test per shipped guarantee.

Each test states its tolerance inline and runs the scenario at full stated
scale (15 s speed windows, the complete built-in pack, 10k IK solves), so
this file is slower than the unit suites. Oracles are independent of the
implementation: bisection root-finds, closed-form dynamics, law of cosines.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import replace

import pytest
from fastapi.testclient import TestClient

from slipstep.engine import DT_S
from slipstep.harness import run_scenario, trace_line
from slipstep.ik import FootTarget, foot_world_position, solve_lower_ik
from slipstep.pd import JointState, PdGains, simulate_single_joint
from slipstep.scenario import (
    ControllerConfig,
    PushDisturbance,
    Scenario,
    SetLegScale,
    SetTarget,
    builtin_scenarios,
)
from slipstep.service import SessionEngine, build_app, load_tape, replay_tape
from slipstep.skeleton import load_skeleton
from slipstep.slip import (
    LegRecord,
    PullContext,
    SlipParams,
    SlipState,
    halt_condition,
    integrate,
    pull_bias,
    step_distance,
    total_energy,
)
from slipstep.terrain import Terrain

G = 9.81
TORQUE_LIMIT_NM = 500.0


def scen(name, duration_s, schedule=(), terrain=None, target=0.0):
    return Scenario(
        name=name,
        terrain=terrain if terrain is not None else Terrain.flat(),
        controller=ControllerConfig(target_speed_mps=target),
        slip=SlipParams(),
        duration_s=duration_s,
        schedule=tuple(schedule),
        rng_seed=42,
    )


@pytest.fixture(scope="module")
def pack():
    """One full run of every built-in scenario, shared by the pack checks."""
    return {name: run_scenario(s) for name, s in builtin_scenarios().items()}


@pytest.fixture(scope="module")
def skeleton():
    return load_skeleton()


# ------------------------------------------------------------------ analytic


def test_step_distance_matches_bisection_oracle():
    """1,000 sampled (speed, height, gravity) tuples agree with an
    independent bisection root of the vault energy balance to 1e-9
    relative, in under a second."""

    def residual(v, h_eff, d, g):
        return 0.5 * v * v + g * h_eff - g * math.sqrt(h_eff * h_eff + d * d)

    def bisect(v, h_eff, g):
        lo, hi = 0.0, 50.0
        assert residual(v, h_eff, hi, g) < 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if residual(v, h_eff, mid, g) >= 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        return 0.5 * (lo + hi)

    rng = random.Random(20260819)
    t0 = time.perf_counter()
    for _ in range(1000):
        v = rng.uniform(0.05, 3.0)
        h = rng.uniform(0.5, 1.2)
        h_eff = rng.uniform(0.3, 1.2)
        g = rng.uniform(3.0, 20.0)
        d = step_distance(v, h, h - h_eff, g)
        oracle = bisect(v, h_eff, g)
        assert math.isclose(d, oracle, rel_tol=1e-9, abs_tol=1e-12), (v, h_eff, g)
    assert time.perf_counter() - t0 < 1.0


def test_pull_bias_identity_and_worked_example():
    """Bias law exact to 1e-12: zero force gives zero bias, the halt
    condition flips exactly at gravity/pull equality, and a 50 N pull with
    gain 0.4 lengthens the step by about 0.0228 m."""
    params = SlipParams()

    beta, d_prime = pull_bias(PullContext.still(params), 0.3233, params)
    assert beta == 0.0 and d_prime == 0.3233

    # boundary: pull exactly equal to the aligned gravity term still halts,
    # one ulp above does not
    level = PullContext(
        external_force_n=(878.0, 0.0, 0.0), gravity_force_n=(0.0, -878.0, 0.0)
    )
    above = PullContext(
        external_force_n=(math.nextafter(878.0, math.inf), 0.0, 0.0),
        gravity_force_n=(0.0, -878.0, 0.0),
    )
    assert halt_condition(level) is True
    assert halt_condition(above) is False

    ctx = PullContext(
        external_force_n=(50.0, 0.0, 0.0),
        gravity_force_n=(0.0, -params.weight_n, 0.0),
    )
    beta, d_prime = pull_bias(ctx, 0.3233, params)
    assert beta == pytest.approx(50.0 / params.weight_n, rel=1e-12)
    assert d_prime == pytest.approx(0.3233 + 0.4 * 50.0 / params.weight_n, rel=1e-12)
    assert d_prime - 0.3233 == pytest.approx(0.0228, abs=5e-5)

    rng = random.Random(7)
    for _ in range(500):
        fp = rng.uniform(-400.0, 400.0)
        base = rng.uniform(0.0, 1.0)
        ctx = PullContext(
            external_force_n=(fp, 0.0, 0.0),
            gravity_force_n=(0.0, -params.weight_n, 0.0),
        )
        beta, d_prime = pull_bias(ctx, base, params)
        assert beta == pytest.approx(fp / params.weight_n, rel=1e-12, abs=1e-15)
        assert d_prime == pytest.approx(
            base + params.step_bias_gain * beta, rel=1e-12, abs=1e-15
        )


def _vault_drift(dt: float) -> float:
    """Relative energy drift of one undamped vault, measured between
    rest-length crossings where the elastic term vanishes."""
    params = SlipParams(spring_k=12000.0, damping_k=0.0)
    rest = params.rest_length_m
    theta0 = math.radians(12.0)
    state = SlipState(
        com_position=(-rest * math.sin(theta0), rest * math.cos(theta0), 0.0),
        com_velocity=(1.0, 0.0, 0.0),
        legs=(
            LegRecord((0.0, 0.0, 0.0), rest, True),
            LegRecord((0.0, 0.0, 0.3), rest, False),
        ),
    )
    e0 = total_energy(state, params)
    last_len = state.leg_length(0)
    for _ in range(int(round(1.2 / dt))):
        state = integrate(state, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), params, dt)
        cur_len = state.leg_length(0)
        if state.com_position[0] > 0.0 and last_len < rest <= cur_len:
            return abs(total_energy(state, params) - e0) / e0
        last_len = cur_len
    raise AssertionError(f"no vault completion at dt={dt}")


def test_energy_drift_small_and_monotone_in_dt():
    """Undamped stance vault drifts < 1% per cycle at dt = 1e-4 and the
    drift shrinks monotonically as dt drops through 1e-2, 1e-3, 1e-4."""
    drifts = {dt: _vault_drift(dt) for dt in (1e-2, 1e-3, 1e-4)}
    assert drifts[1e-4] < 0.01
    assert drifts[1e-2] > drifts[1e-3] > drifts[1e-4]


# ------------------------------------------------------------------- walking


def test_flat_walk_holds_target_speeds():
    """Flat ground at 0.5, 1.0, 1.5 m/s: mean speed over the 15 s after a
    3 s transient stays within 10% of target; each run simulates in under
    5 s of wall time."""
    for target in (0.5, 1.0, 1.5):
        t0 = time.perf_counter()
        res = run_scenario(scen("flat-accept", 18.0, target=target))
        wall = time.perf_counter() - t0
        mean = res.summary["speed_mps"]["mean"]
        assert res.summary["fall_time_s"] is None
        assert abs(mean - target) <= 0.10 * target, (target, mean)
        assert wall < 5.0, (target, wall)


def test_slope_and_pull_hold_speed():
    """25 degree climb and descent at their 0.5 m/s target, and constant
    50 N pull/push at the 1.0 m/s flat target, all stay within 15% of
    target with no fall."""
    runs = [
        ("up", scen("slope-up", 18.0, terrain=Terrain.slope(math.radians(25.0)), target=0.5), 0.5),
        ("down", scen("slope-down", 18.0, terrain=Terrain.slope(math.radians(-25.0)), target=0.5), 0.5),
        ("pull", scen("pull-along", 18.0, schedule=[PushDisturbance(3.0, (50.0, 0.0, 0.0), 15.0)], target=1.0), 1.0),
        ("push", scen("push-against", 18.0, schedule=[PushDisturbance(3.0, (-50.0, 0.0, 0.0), 15.0)], target=1.0), 1.0),
    ]
    for label, scenario, target in runs:
        res = run_scenario(scenario)
        mean = res.summary["speed_mps"]["mean"]
        assert res.summary["fall_time_s"] is None, label
        assert abs(mean - target) <= 0.15 * target, (label, mean)


# ---------------------------------------------------------------- balancing


def test_sway_absorbs_small_pushes_steps_on_large():
    """30 N / 0.2 s pushes from 8 horizontal directions recover with zero
    steps; 400 N / 0.2 s from the same directions each force at least one
    step with no fall; the whole block runs in under 10 s."""
    t0 = time.perf_counter()
    for k in range(8):
        ang = k * math.pi / 4.0
        direction = (math.cos(ang), 0.0, math.sin(ang))

        small = PushDisturbance(1.0, (30.0 * direction[0], 0.0, 30.0 * direction[2]), 0.2)
        res = run_scenario(scen("sway-small", 4.0, schedule=[small]))
        assert res.summary["step_count"] == 0, k
        assert res.summary["fall_time_s"] is None, k
        assert res.summary["sway_recovery_count"] == 1, k

        big = PushDisturbance(1.0, (400.0 * direction[0], 0.0, 400.0 * direction[2]), 0.2)
        res = run_scenario(scen("sway-large", 4.0, schedule=[big]))
        assert res.summary["step_count"] >= 1, k
        assert res.summary["fall_time_s"] is None, k
    assert time.perf_counter() - t0 < 10.0


def test_slope_stand_zero_steps_rest_cap_held():
    """Standing on a 20 degree slope for 10 s: no step events, and the
    longer rest length equals the nominal leg length on every tick."""
    res = run_scenario(
        scen("slope-stand", 10.0, terrain=Terrain.slope(math.radians(20.0)))
    )
    assert res.summary["fall_time_s"] is None
    assert res.summary["step_count"] == 0
    assert len(res.records) == 1000
    for rec in res.records:
        assert max(rec["rest_lengths_m"]) == pytest.approx(0.9, abs=1e-12), rec["tick"]


def test_rotating_platform_never_falls(pack):
    """Platform tilting sinusoidally to 45 degrees over 60 s with four
    scheduled 100 N pushes: never reaches FALLEN and the rest-length cap
    holds on every tick."""
    res = pack["rotating-platform-45"]
    assert res.summary["fall_time_s"] is None
    assert len(res.records) == 6000
    for rec in res.records:
        assert max(rec["rest_lengths_m"]) == pytest.approx(0.9, abs=1e-12), rec["tick"]


# -------------------------------------------------------------------- joints


def test_torque_clamp_across_pack(pack):
    """No recorded joint torque in any built-in scenario exceeds 500 Nm."""
    for name, res in pack.items():
        worst = max(r["torque_max_nm"] for r in res.records)
        assert worst <= TORQUE_LIMIT_NM + 1e-9, (name, worst)


def test_pd_step_response_and_gravity_hold():
    """Critically damped single-joint step response overshoots < 1%; under
    a gravity load the settled holding torque matches m*g*L*sin(theta)
    within 5%."""
    m, g, L = 5.0, 9.81, 0.4
    inertia = m * L * L

    kp = 300.0
    kd = 2.0 * math.sqrt(kp * inertia)
    trace = simulate_single_joint(PdGains(kp, kd), inertia, JointState(0.5, 0.0), 1e-3, 2.0)
    overshoot = max(trace.angles_rad) - 0.5
    assert overshoot < 0.01 * 0.5
    assert trace.angles_rad[-1] == pytest.approx(0.5, abs=1e-6)

    theta_d = math.radians(30.0)
    trace = simulate_single_joint(
        PdGains(300.0, 30.0),
        inertia,
        JointState(theta_d, 0.0),
        1e-3,
        5.0,
        initial=JointState(theta_d, 0.0),
        external_torque=lambda s, t: -m * g * L * math.sin(s.angle_rad),
    )
    assert abs(trace.velocities_rps[-1]) < 1e-8
    settled = trace.angles_rad[-1]
    assert trace.torques_nm[-1] == pytest.approx(m * g * L * math.sin(settled), rel=0.05)


def test_ik_exact_on_ten_thousand_targets(skeleton):
    """10,000 random reachable double-support targets: worst foot position
    error < 1e-6 m with every joint limit satisfied; the knee angle matches
    the law-of-cosines oracle to 1e-9 rad."""
    rng = random.Random(20260819)
    worst = 0.0
    for _ in range(10_000):
        com = (rng.uniform(-0.2, 0.2), rng.uniform(0.6, 0.92), rng.uniform(-0.2, 0.2))
        targets = []
        for sign in (-1, 1):
            targets.append(
                FootTarget(
                    (
                        com[0] + rng.uniform(-0.25, 0.35),
                        0.0,
                        com[2] + sign * rng.uniform(0.06, 0.3),
                    ),
                    rng.uniform(-0.3, 0.3),
                )
            )
        pose = solve_lower_ik(skeleton, com, (targets[0], targets[1]))
        for side, t in zip(("l", "r"), targets):
            err = math.dist(foot_world_position(skeleton, pose, side), t.position)
            worst = max(worst, err)
        i = 0
        for joint in skeleton.joints:
            for dof in joint.dofs:
                assert dof.min_rad - 1e-12 <= pose.angles[i] <= dof.max_rad + 1e-12
                i += 1
    assert worst < 1e-6

    l1 = skeleton.segment_length("knee_l")
    l2 = skeleton.segment_length("ankle_l")
    span = 0.8 * (l1 + l2)
    pose = solve_lower_ik(
        skeleton,
        (0.0, span + 0.07, 0.0),
        (FootTarget((0.0, 0.0, -0.1)), FootTarget((0.0, 0.0, 0.1))),
    )
    inner = math.acos((l1 * l1 + l2 * l2 - span * span) / (2 * l1 * l2))
    assert abs(pose.angle(skeleton, "knee_l", "z")) == pytest.approx(
        math.pi - inner, abs=1e-9
    )


# ------------------------------------------------------------ reproducibility


def test_every_builtin_trace_is_byte_identical(pack):
    """Each built-in scenario run twice with its seed produces traces that
    match byte for byte."""
    for name, scenario in builtin_scenarios().items():
        again = run_scenario(scenario)
        first = pack[name]
        assert len(again.records) == len(first.records), name
        for a, b in zip(first.records, again.records):
            assert trace_line(a) == trace_line(b), (name, a["tick"])


def test_tick_compute_budget(pack):
    """The 99th percentile per-tick compute time over the push-storm run
    stays under 5 ms."""
    p99_us = pack["push-storm"].summary["compute_us"]["p99"]
    assert p99_us < 5000.0, p99_us


# ------------------------------------------------------------------- service


def _drain_until(ws, want, limit=600):
    """Read frames until want(frame) is truthy; returns (frame, frames_seen)."""
    seen = 0
    while seen < limit:
        msg = ws.receive_json()
        if msg["type"] != "FRAME":
            continue
        seen += 1
        if want(msg):
            return msg, seen
    raise AssertionError(f"no matching frame within {limit} frames")


def test_live_round_trip_echo_and_step():
    """A headless client sends SET_SPEED 1.0 then PUSH 400 N; each command
    is echoed in a frame within 10 broadcast frames, and a step event
    arrives within one simulated second of the push."""
    # real-time pacing: the echo latency being checked is the deployed
    # behavior, and a flat-out clock would flood frames between send and
    # apply
    session = SessionEngine(scen("live-accept", 60.0), frame_every=1)
    app = build_app(session, pace_scale=1.0)

    def echoed(name):
        return lambda f: any(c["name"] == name for c in f["applied"])

    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()
            assert hello["type"] == "HELLO"

            ws.send_text(json.dumps({"type": "COMMAND", "name": "SET_SPEED", "mps": 1.0}))
            frame, seen = _drain_until(ws, echoed("SET_SPEED"))
            assert seen <= 10, seen

            ws.send_text(
                json.dumps(
                    {
                        "type": "COMMAND",
                        "name": "PUSH",
                        "direction": [0.0, 1.0],
                        "magnitude_n": 400.0,
                        "duration_s": 0.2,
                    }
                )
            )
            frame, seen = _drain_until(ws, echoed("PUSH"))
            assert seen <= 10, seen
            push_tick = frame["tick"]

            stepped, _ = _drain_until(
                ws, lambda f: f["step_event"] is not None, limit=150
            )
            assert stepped["tick"] - push_tick <= 100
            assert not stepped["fallen"]


def test_replay_reproduces_live_session(tmp_path):
    """A live session's recorded command tape, replayed, reproduces the
    streamed state byte for byte; the same commands expressed as a scenario
    schedule through run_scenario match as well."""
    scenario = scen("replay-accept", 8.0)
    tape_path = tmp_path / "session.tape.jsonl"
    session = SessionEngine(scenario, frame_every=1, tape_path=tape_path)

    frames = []

    def run_to(tick):
        while session.engine.tick < tick:
            frame = session.tick()
            if frame is not None:
                frames.append(frame)

    run_to(120)
    session.handle_message(json.dumps({"type": "COMMAND", "name": "SET_SPEED", "mps": 1.0}))
    run_to(400)
    session.handle_message(
        json.dumps(
            {
                "type": "COMMAND",
                "name": "PUSH",
                "direction": [0.0, 1.0],
                "magnitude_n": 400.0,
                "duration_s": 0.2,
            }
        )
    )
    run_to(600)
    session.handle_message(
        json.dumps({"type": "COMMAND", "name": "SET_LEG_SCALE", "factor": 0.9})
    )
    run_to(800)
    assert len(frames) == 800

    tape = load_tape(tape_path)
    assert [c["name"] for c in tape] == ["SET_SPEED", "PUSH", "SET_LEG_SCALE"]
    replayed = replay_tape(scenario, tape, until_tick=800)
    assert len(replayed) == 800

    streamed_keys = (
        "com", "vel", "mode", "feet", "stance", "rest_lengths_m",
        "step_event", "torque_max_nm", "fallen",
    )
    for frame, rec in zip(frames, replayed):
        # a frame reports the post-step tick count, a record its 0-based index
        assert frame["tick"] == rec["tick"] + 1
        live = json.dumps({k: frame[k] for k in streamed_keys}, sort_keys=True)
        rep = json.dumps({k: rec[k] for k in streamed_keys}, sort_keys=True)
        assert live == rep, frame["tick"]

    as_schedule = replace(
        scenario,
        schedule=(
            SetTarget(tape[0]["tick"] * DT_S, 1.0, (1.0, 0.0)),
            PushDisturbance(tape[1]["tick"] * DT_S, (0.0, 0.0, 400.0), 0.2),
            SetLegScale(tape[2]["tick"] * DT_S, 0.9),
        ),
    )
    harness = run_scenario(as_schedule)
    assert len(harness.records) == 800
    for a, b in zip(replayed, harness.records):
        assert trace_line(a) == trace_line(b), a["tick"]
