/** Wire schema for the live session socket, mirrored field by field.
 *
 * Server messages are HELLO, FRAME, and ERROR envelopes; every one carries
 * a session id, a schema version, and a strictly increasing sequence
 * number. Clients send COMMAND objects. Anything that does not match the
 * schema is rejected here, before it can reach the view model.
 */

export const WIRE_SCHEMA_VERSION = 1;

/** UI caps: the service accepts more, the viewer deliberately offers less. */
export const PUSH_CAP_N = 500;
export const TILT_CAP_RAD = (45 * Math.PI) / 180;
export const SPEED_CAP_MPS = 3;
export const BOX_MASS_CAP_KG = 50;
export const LEG_SCALE_RANGE: readonly [number, number] = [0.3, 2.0];

export type Vec3 = [number, number, number];
export type Vec2 = [number, number];

export interface SupportCircle {
  center: Vec2;
  radius: number;
}

export interface SupportCapsule {
  a: Vec2;
  b: Vec2;
  radius: number;
}

export interface Support {
  circles: SupportCircle[];
  capsule: SupportCapsule | null;
}

export interface AppliedCommand {
  name: string;
  tick: number;
  [key: string]: unknown;
}

interface Envelope {
  session_id: string;
  schema_version: number;
  seq: number;
}

export interface HelloMsg extends Envelope {
  type: "HELLO";
  frame_every: number;
  dt_s: number;
  snapshot: unknown;
}

export interface FrameMsg extends Envelope {
  type: "FRAME";
  tick: number;
  time_s: number;
  paused: boolean;
  com: Vec3;
  vel: Vec3;
  mode: string;
  region: string | null;
  feet: [Vec3, Vec3];
  stance: [boolean, boolean];
  rest_lengths_m: [number, number];
  joints: Record<string, Vec3>;
  support: Support;
  step_event: Record<string, unknown> | null;
  events: Record<string, unknown>[];
  applied: AppliedCommand[];
  torque_max_nm: number;
  fallen: boolean;
  overload: boolean;
}

export interface ErrorMsg extends Envelope {
  type: "ERROR";
  error: string;
}

export type ServerMessage = HelloMsg | FrameMsg | ErrorMsg;

export class ProtocolError extends Error {}

function isVec3(v: unknown): v is Vec3 {
  return Array.isArray(v) && v.length === 3 && v.every((x) => typeof x === "number");
}

function need(cond: boolean, what: string): asserts cond {
  if (!cond) throw new ProtocolError(`malformed message: ${what}`);
}

/** Parse and validate one socket message. Throws ProtocolError on any
 * schema mismatch, including an unknown schema_version. */
export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("not valid JSON");
  }
  need(typeof raw === "object" && raw !== null && !Array.isArray(raw), "not an object");
  const msg = raw as Record<string, unknown>;
  need(typeof msg.session_id === "string", "session_id missing");
  need(typeof msg.seq === "number", "seq missing");
  if (msg.schema_version !== WIRE_SCHEMA_VERSION) {
    throw new ProtocolError(
      `schema_version ${String(msg.schema_version)} (viewer speaks ${WIRE_SCHEMA_VERSION})`,
    );
  }
  switch (msg.type) {
    case "HELLO":
      need(typeof msg.frame_every === "number", "frame_every missing");
      need(typeof msg.dt_s === "number", "dt_s missing");
      return msg as unknown as HelloMsg;
    case "FRAME": {
      need(typeof msg.tick === "number", "tick missing");
      need(typeof msg.time_s === "number", "time_s missing");
      need(isVec3(msg.com), "com must be [x,y,z]");
      need(isVec3(msg.vel), "vel must be [x,y,z]");
      need(typeof msg.joints === "object" && msg.joints !== null, "joints missing");
      need(Array.isArray(msg.applied), "applied missing");
      need(typeof msg.fallen === "boolean", "fallen missing");
      return msg as unknown as FrameMsg;
    }
    case "ERROR":
      need(typeof msg.error === "string", "error missing");
      return msg as unknown as ErrorMsg;
    default:
      throw new ProtocolError(`unknown message type ${String(msg.type)}`);
  }
}

// ------------------------------------------------------------------ commands

export interface Command {
  type: "COMMAND";
  name: string;
  [key: string]: unknown;
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

/** Push from a drag vector; magnitude capped at the UI limit, direction
 * normalized. Returns null for a degenerate drag. */
export function buildPush(
  dirX: number,
  dirZ: number,
  magnitudeN: number,
  durationS = 0.2,
): Command | null {
  const len = Math.hypot(dirX, dirZ);
  if (len < 1e-9 || magnitudeN <= 0) return null;
  return {
    type: "COMMAND",
    name: "PUSH",
    direction: [dirX / len, dirZ / len],
    magnitude_n: clamp(magnitudeN, 0, PUSH_CAP_N),
    duration_s: clamp(durationS, 0.01, 5),
  };
}

export function buildSetSpeed(mps: number): Command {
  return { type: "COMMAND", name: "SET_SPEED", mps: clamp(mps, 0, SPEED_CAP_MPS) };
}

export function buildSetDirection(yawRad: number): Command {
  return { type: "COMMAND", name: "SET_DIRECTION", yaw_rad: clamp(yawRad, -2 * Math.PI, 2 * Math.PI) };
}

export function buildTilt(axis: "x" | "z", angleRad: number): Command {
  return {
    type: "COMMAND",
    name: "TILT_PLATFORM",
    axis,
    angle_rad: clamp(angleRad, -TILT_CAP_RAD, TILT_CAP_RAD),
  };
}

export function buildSetBoxMass(kg: number): Command {
  return { type: "COMMAND", name: "SET_BOX_MASS", kg: clamp(kg, 0, BOX_MASS_CAP_KG) };
}

export function buildSetLegScale(factor: number): Command {
  return {
    type: "COMMAND",
    name: "SET_LEG_SCALE",
    factor: clamp(factor, LEG_SCALE_RANGE[0], LEG_SCALE_RANGE[1]),
  };
}

export function buildPause(): Command {
  return { type: "COMMAND", name: "PAUSE" };
}

export function buildResume(): Command {
  return { type: "COMMAND", name: "RESUME" };
}

export function buildReset(seed = 0): Command {
  return { type: "COMMAND", name: "RESET", seed: Math.trunc(seed) };
}

export function serializeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
