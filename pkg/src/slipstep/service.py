"""Live session: one simulation streamed over a websocket, steerable by commands.

Wire protocol (JSON text messages, one per websocket message):

    server -> client
      HELLO  {type, session_id, schema_version, seq, frame_every, dt_s, snapshot}
      FRAME  {type, session_id, schema_version, seq, tick, time_s, com, vel,
              mode, region, feet, stance, rest_lengths_m, joints, support,
              step_event, events, applied, torque_max_nm, fallen, overload}
      ERROR  {type, session_id, schema_version, seq, error}

    client -> server  (COMMAND {type: "COMMAND", name, ...args})
      PUSH {direction: [dx, dz], magnitude_n, duration_s}
      SET_SPEED {mps} | SET_DIRECTION {yaw_rad} | TILT_PLATFORM {axis, angle_rad}
      SET_BOX_MASS {kg} | SET_LEG_SCALE {factor} | PAUSE | RESUME | RESET {seed}

Every server message carries the session id, a schema version, and a
sequence number that only ever increases. Unknown or malformed commands get
an ERROR reply, never silence. Sim commands apply at the next tick boundary
in arrival order; PAUSE and RESUME gate the clock itself and take effect
immediately. Frames go out every frame_every-th tick (default 2: 50 Hz
broadcast from the 100 Hz sim).

All session state is owned by a single event-loop task; sockets only feed
its command queue and fan out its frames. A recorded command tape replayed
through replay_tape() reproduces the engine's trace records byte for byte.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
import uuid
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .balance import build_support_region
from .engine import DT_S, SteppingEngine
from .scenario import PUSH_FORCE_SANITY_N, Scenario, with_seed
from .terrain import Terrain
from .vec import ground, normalize2

WIRE_SCHEMA_VERSION = 1
MAX_TILT_RAD = math.radians(45.0)
# wall-clock slip beyond this is reported in the next frame as overload
OVERLOAD_SLIP_S = 0.25

COMMAND_NAMES = (
    "PUSH",
    "SET_SPEED",
    "SET_DIRECTION",
    "TILT_PLATFORM",
    "SET_BOX_MASS",
    "SET_LEG_SCALE",
    "PAUSE",
    "RESUME",
    "RESET",
)


class CommandError(ValueError):
    """Malformed or out-of-range client command."""


def _require_number(args: dict, key: str, lo: float, hi: float) -> float:
    try:
        value = float(args[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(f"{key} must be a number") from exc
    if not (lo <= value <= hi) or math.isnan(value):
        raise CommandError(f"{key} must be in [{lo:g}, {hi:g}], got {value!r}")
    return value


def parse_command(raw: dict) -> dict:
    """Validate one client message into a normalized command dict."""
    if not isinstance(raw, dict):
        raise CommandError("message must be a JSON object")
    if raw.get("type") != "COMMAND":
        raise CommandError(f"unknown message type {raw.get('type')!r}")
    name = raw.get("name")
    if name not in COMMAND_NAMES:
        raise CommandError(f"unknown command {name!r}")
    cmd: dict = {"name": name}
    if name == "PUSH":
        mag = _require_number(raw, "magnitude_n", 0.0, PUSH_FORCE_SANITY_N)
        dur = _require_number(raw, "duration_s", 0.01, 5.0)
        direction = raw.get("direction")
        if (
            not isinstance(direction, (list, tuple))
            or len(direction) != 2
            or not all(isinstance(v, (int, float)) for v in direction)
        ):
            raise CommandError("direction must be [dx, dz]")
        dx, dz = float(direction[0]), float(direction[1])
        if math.hypot(dx, dz) < 1e-9:
            raise CommandError("direction must be nonzero")
        cmd.update(direction=list(normalize2((dx, dz))), magnitude_n=mag, duration_s=dur)
    elif name == "SET_SPEED":
        cmd["mps"] = _require_number(raw, "mps", 0.0, 3.0)
    elif name == "SET_DIRECTION":
        cmd["yaw_rad"] = _require_number(raw, "yaw_rad", -math.tau, math.tau)
    elif name == "TILT_PLATFORM":
        axis = raw.get("axis")
        if axis not in ("x", "z"):
            raise CommandError("axis must be 'x' or 'z'")
        cmd["axis"] = axis
        cmd["angle_rad"] = _require_number(raw, "angle_rad", -MAX_TILT_RAD, MAX_TILT_RAD)
    elif name == "SET_BOX_MASS":
        cmd["kg"] = _require_number(raw, "kg", 0.0, 50.0)
    elif name == "SET_LEG_SCALE":
        cmd["factor"] = _require_number(raw, "factor", 0.3, 2.0)
    elif name == "RESET":
        try:
            cmd["seed"] = int(raw.get("seed", 0))
        except (TypeError, ValueError) as exc:
            raise CommandError("seed must be an integer") from exc
    return cmd


def apply_command(engine: SteppingEngine, cmd: dict) -> SteppingEngine:
    """Apply one validated sim command at the current tick boundary.

    Returns the engine to keep using; RESET swaps in a fresh one. The live
    session and tape replay both land here, which is what keeps them
    byte-identical.
    """
    name = cmd["name"]
    if name == "PUSH":
        dx, dz = cmd["direction"]
        mag = cmd["magnitude_n"]
        engine.queue_push((dx * mag, 0.0, dz * mag), cmd["duration_s"])
    elif name == "SET_SPEED":
        engine.set_target(cmd["mps"])
    elif name == "SET_DIRECTION":
        engine.set_direction(cmd["yaw_rad"])
    elif name == "TILT_PLATFORM":
        engine.set_terrain(Terrain.tilted_plane(cmd["angle_rad"], cmd["axis"]))
    elif name == "SET_BOX_MASS":
        engine.set_box_mass(cmd["kg"])
    elif name == "SET_LEG_SCALE":
        engine.set_leg_scale(cmd["factor"])
    elif name == "RESET":
        return SteppingEngine(with_seed(engine.scenario, cmd["seed"]))
    else:
        raise CommandError(f"{name} is not a sim command")
    return engine


class SessionEngine:
    """Session state machine, synchronous and transport-free.

    handle_message() validates and queues; tick() applies queued commands at
    the boundary, advances one tick, and returns the frame to broadcast (or
    None on decimated and paused ticks). The network layer never touches the
    engine directly.
    """

    def __init__(
        self,
        scenario: Scenario,
        frame_every: int = 2,
        session_id: str | None = None,
        tape_path: str | Path | None = None,
    ):
        if frame_every < 1:
            raise ValueError("frame_every must be >= 1")
        self.scenario = scenario
        self.engine = SteppingEngine(scenario)
        self.frame_every = frame_every
        self.session_id = session_id if session_id is not None else uuid.uuid4().hex
        self.tape_path = Path(tape_path) if tape_path is not None else None
        self.seq = 0
        self.paused = False
        self.pending: list[dict] = []
        self.tape: list[dict] = []
        self.overload = False
        self._applied_since_frame: list[dict] = []
        self._fall_announced = False

    # -------------------------------------------------------------- ingress

    def handle_message(self, text: str) -> dict | None:
        """Queue a client message; returns an immediate reply doc or None."""
        try:
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CommandError(f"not valid JSON: {exc}") from exc
            cmd = parse_command(raw)
        except CommandError as exc:
            return self._envelope({"type": "ERROR", "error": str(exc)})
        if cmd["name"] in ("PAUSE", "RESUME"):
            # clock gates, not sim state: immediate, echoed right away so a
            # paused session still confirms the command
            self.paused = cmd["name"] == "PAUSE"
            self._note_applied(cmd)
            return self.frame()
        self.pending.append(cmd)
        return None

    # ----------------------------------------------------------------- tick

    def tick(self) -> dict | None:
        """One tick boundary: apply queued commands, advance, maybe frame."""
        if self.paused:
            # a paused clock has no tick boundaries: queued commands wait,
            # sim state cannot change
            return None
        for cmd in self.pending:
            fresh = apply_command(self.engine, cmd)
            if fresh is not self.engine:  # RESET swapped engines
                self.engine = fresh
                self._fall_announced = False
            self._note_applied(cmd)
        self.pending.clear()
        if self.engine.fallen:
            # absorbing: hold the last state, announce once, wait for RESET
            if self._fall_announced:
                return None
            self._fall_announced = True
            return self.frame()
        record = self.engine.step()
        if record["fallen"]:
            self._fall_announced = True
            return self.frame(record)
        if self.engine.tick % self.frame_every == 0:
            return self.frame(record)
        return None

    def _note_applied(self, cmd: dict) -> None:
        entry = dict(cmd, tick=self.engine.tick)
        self.tape.append(entry)
        self._applied_since_frame.append(entry)
        if self.tape_path is not None:
            with open(self.tape_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, separators=(",", ":")) + "\n")

    # --------------------------------------------------------------- egress

    def _envelope(self, payload: dict) -> dict:
        self.seq += 1
        return {
            "session_id": self.session_id,
            "schema_version": WIRE_SCHEMA_VERSION,
            "seq": self.seq,
            **payload,
        }

    def _support_doc(self) -> dict:
        stance = [ground(leg.foot_anchor) for leg in self.engine.state.legs if leg.is_stance]
        if not stance:
            return {"circles": [], "capsule": None}
        region = build_support_region(stance, self.engine.config.foot_radius_m)
        capsule = None
        if region.bridge_capsule is not None:
            capsule = {
                "a": list(region.bridge_capsule.a),
                "b": list(region.bridge_capsule.b),
                "radius": region.bridge_capsule.radius,
            }
        return {
            "circles": [
                {"center": list(c.center), "radius": c.radius}
                for c in region.foot_circles
            ],
            "capsule": capsule,
        }

    def frame(self, record: dict | None = None) -> dict:
        """Current state as a FRAME; uses the given trace record if fresh."""
        eng = self.engine
        s = eng.state
        applied, self._applied_since_frame = self._applied_since_frame, []
        doc = {
            "type": "FRAME",
            "tick": eng.tick,
            "time_s": round(eng.time_s, 9),
            "paused": self.paused,
            "com": list(s.com_position),
            "vel": list(s.com_velocity),
            "mode": record["mode"] if record else ("fallen" if eng.fallen else "hold"),
            "region": record["region"] if record else None,
            "feet": [list(s.legs[0].foot_anchor), list(s.legs[1].foot_anchor)],
            "stance": [s.legs[0].is_stance, s.legs[1].is_stance],
            "rest_lengths_m": [
                s.legs[0].current_rest_length_m,
                s.legs[1].current_rest_length_m,
            ],
            "joints": {
                name: list(p) for name, p in eng.joint_world_positions().items()
            },
            "support": self._support_doc(),
            "step_event": record["step_event"] if record else None,
            "events": record["events"] if record else [],
            "applied": applied,
            "torque_max_nm": record["torque_max_nm"] if record else 0.0,
            "fallen": eng.fallen,
            "overload": self.overload,
        }
        self.overload = False
        return self._envelope(doc)

    def hello(self) -> dict:
        return self._envelope(
            {
                "type": "HELLO",
                "frame_every": self.frame_every,
                "dt_s": DT_S,
                "snapshot": self.snapshot(),
            }
        )

    def snapshot(self) -> dict:
        """Full-state document; pause status is clock state, not sim state,
        so a paused snapshot equals the post-resume snapshot at that tick."""
        return {
            "type": "SNAPSHOT",
            "session_id": self.session_id,
            "tick": self.engine.tick,
            "state": self.engine.snapshot_state(),
        }


def replay_tape(
    scenario: Scenario,
    tape: list[dict],
    until_tick: int | None = None,
) -> list[dict]:
    """Re-run a recorded command tape; returns the engine trace records.

    Commands re-apply at the exact tick boundaries the session applied them,
    through the same apply_command() path, so the records match the live
    run's byte for byte. PAUSE and RESUME carry no sim effect and are
    skipped. A RESET truncates history the same way it did live: records
    continue from the fresh engine.
    """
    # tape order is application order; a RESET restarts tick numbering, so
    # sorting by tick would scramble it
    sim = [c for c in tape if c["name"] not in ("PAUSE", "RESUME")]
    horizon = until_tick
    if horizon is None:
        horizon = int(round(scenario.duration_s / DT_S))
    engine = SteppingEngine(scenario)
    records: list[dict] = []
    i = 0
    while engine.tick < horizon and not engine.fallen:
        while i < len(sim) and sim[i]["tick"] <= engine.tick:
            fresh = apply_command(engine, sim[i])
            if fresh is not engine:
                engine = fresh
                records.clear()
            i += 1
        records.append(engine.step())
    return records


def load_tape(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def build_app(session: SessionEngine, pace_scale: float = 1.0):
    """FastAPI app around one session: /ws stream plus /snapshot.

    pace_scale 1.0 runs the sim at wall-clock rate; 0 runs it flat out
    (tests). The clock task owns all session state; websocket handlers only
    queue messages and subscribe to the broadcast fan-out.
    """
    clients: set[asyncio.Queue] = set()

    async def clock():
        budget = DT_S * pace_scale
        next_deadline = time.monotonic()
        while True:
            frame = session.tick()
            if frame is not None:
                for q in clients:
                    q.put_nowait(frame)
            if budget > 0.0:
                next_deadline += budget
                now = time.monotonic()
                lag = now - next_deadline
                if lag > OVERLOAD_SLIP_S:
                    # fell behind the wall clock: say so and resync rather
                    # than silently running slow
                    session.overload = True
                    next_deadline = now
                await asyncio.sleep(max(next_deadline - time.monotonic(), 0.0))
            else:
                await asyncio.sleep(0)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(clock())
        yield
        task.cancel()

    app = FastAPI(title="slipstep live session", lifespan=lifespan)
    app.state.session = session

    @app.get("/snapshot")
    async def snapshot():
        return session.snapshot()

    @app.websocket("/ws")
    async def ws(socket: WebSocket):
        await socket.accept()
        inbox: asyncio.Queue = asyncio.Queue()
        clients.add(inbox)
        await socket.send_json(session.hello())

        async def pump():
            while True:
                await socket.send_json(await inbox.get())

        sender = asyncio.create_task(pump())
        try:
            while True:
                text = await socket.receive_text()
                reply = session.handle_message(text)
                if reply is not None:
                    if reply["type"] == "ERROR":
                        await socket.send_json(reply)
                    else:  # pause/resume confirmations go to everyone
                        for q in clients:
                            q.put_nowait(reply)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            clients.discard(inbox)

    return app


def serve(
    scenario: Scenario,
    host: str = "127.0.0.1",
    port: int = 8765,
    frame_every: int = 2,
    tape_path: str | None = None,
):
    """Blocking entry point used by the CLI serve subcommand."""
    import uvicorn

    session = SessionEngine(scenario, frame_every=frame_every, tape_path=tape_path)
    app = build_app(session, pace_scale=1.0)
    uvicorn.run(app, host=host, port=port, log_level="info")
