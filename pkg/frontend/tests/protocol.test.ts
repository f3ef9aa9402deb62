import { describe, expect, it } from "vitest";

import {
  PUSH_CAP_N,
  ProtocolError,
  TILT_CAP_RAD,
  buildPush,
  buildReset,
  buildSetBoxMass,
  buildSetLegScale,
  buildSetSpeed,
  buildTilt,
  parseServerMessage,
  serializeCommand,
} from "../src/protocol.js";

const envelope = { session_id: "abc", schema_version: 1, seq: 1 };

const frameDoc = {
  ...envelope,
  type: "FRAME",
  tick: 10,
  time_s: 0.1,
  paused: false,
  com: [0, 0.86, 0],
  vel: [0.1, 0, 0],
  mode: "hold",
  region: "inner",
  feet: [
    [0, 0, -0.1],
    [0, 0, 0.1],
  ],
  stance: [true, true],
  rest_lengths_m: [0.9, 0.9],
  joints: { pelvis: [0, 0.96, 0] },
  support: { circles: [{ center: [0, -0.1], radius: 0.12 }], capsule: null },
  step_event: null,
  events: [],
  applied: [],
  torque_max_nm: 120.5,
  fallen: false,
  overload: false,
};

describe("parseServerMessage", () => {
  it("accepts a valid FRAME", () => {
    const msg = parseServerMessage(JSON.stringify(frameDoc));
    expect(msg.type).toBe("FRAME");
    if (msg.type === "FRAME") {
      expect(msg.tick).toBe(10);
      expect(msg.com[1]).toBeCloseTo(0.86);
    }
  });

  it("accepts HELLO and ERROR", () => {
    const hello = parseServerMessage(
      JSON.stringify({ ...envelope, type: "HELLO", frame_every: 2, dt_s: 0.01, snapshot: {} }),
    );
    expect(hello.type).toBe("HELLO");
    const error = parseServerMessage(
      JSON.stringify({ ...envelope, type: "ERROR", error: "nope" }),
    );
    expect(error.type).toBe("ERROR");
  });

  it("rejects non-JSON and non-objects", () => {
    expect(() => parseServerMessage("{nope")).toThrow(ProtocolError);
    expect(() => parseServerMessage("[1,2]")).toThrow(ProtocolError);
    expect(() => parseServerMessage("3")).toThrow(ProtocolError);
  });

  it("rejects a wrong schema version with a readable message", () => {
    const doc = { ...frameDoc, schema_version: 99 };
    expect(() => parseServerMessage(JSON.stringify(doc))).toThrow(/schema_version 99/);
  });

  it("rejects unknown types and missing envelope fields", () => {
    expect(() =>
      parseServerMessage(JSON.stringify({ ...envelope, type: "NOPE" })),
    ).toThrow(ProtocolError);
    const { session_id: _drop, ...rest } = frameDoc;
    expect(() => parseServerMessage(JSON.stringify(rest))).toThrow(/session_id/);
  });

  it.each([
    ["com", { ...frameDoc, com: [1, 2] }],
    ["vel", { ...frameDoc, vel: "fast" }],
    ["joints", { ...frameDoc, joints: null }],
    ["applied", { ...frameDoc, applied: "none" }],
    ["fallen", { ...frameDoc, fallen: "no" }],
    ["tick", { ...frameDoc, tick: "ten" }],
  ])("rejects a FRAME with bad %s", (_name, doc) => {
    expect(() => parseServerMessage(JSON.stringify(doc))).toThrow(ProtocolError);
  });

  it("rejects an ERROR without text", () => {
    expect(() =>
      parseServerMessage(JSON.stringify({ ...envelope, type: "ERROR" })),
    ).toThrow(ProtocolError);
  });
});

describe("command builders", () => {
  it("normalizes the push direction and caps the magnitude", () => {
    const cmd = buildPush(3, 4, 9000);
    expect(cmd).not.toBeNull();
    expect(cmd!.direction).toEqual([0.6, 0.8]);
    expect(cmd!.magnitude_n).toBe(PUSH_CAP_N);
    expect(cmd!.duration_s).toBeCloseTo(0.2);
  });

  it("refuses degenerate pushes", () => {
    expect(buildPush(0, 0, 100)).toBeNull();
    expect(buildPush(1, 0, 0)).toBeNull();
  });

  it("clamps tilt to the 45 degree platform limit", () => {
    expect(buildTilt("x", 10).angle_rad).toBeCloseTo(TILT_CAP_RAD);
    expect(buildTilt("z", -10).angle_rad).toBeCloseTo(-TILT_CAP_RAD);
    expect(buildTilt("x", 0.1).angle_rad).toBeCloseTo(0.1);
  });

  it("clamps the remaining setpoints to their ranges", () => {
    expect(buildSetSpeed(99).mps).toBe(3);
    expect(buildSetSpeed(-1).mps).toBe(0);
    expect(buildSetLegScale(0).factor).toBe(0.3);
    expect(buildSetLegScale(5).factor).toBe(2);
    expect(buildSetBoxMass(500).kg).toBe(50);
    expect(buildReset(3.9).seed).toBe(3);
  });

  it("serializes to the wire shape", () => {
    const round = JSON.parse(serializeCommand(buildSetSpeed(1.0)));
    expect(round).toEqual({ type: "COMMAND", name: "SET_SPEED", mps: 1.0 });
  });
});
