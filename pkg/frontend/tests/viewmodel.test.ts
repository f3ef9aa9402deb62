import { describe, expect, it } from "vitest";

import {
  ErrorMsg,
  FrameMsg,
  HelloMsg,
  buildPause,
  buildPush,
  buildSetSpeed,
} from "../src/protocol.js";
import { ViewModel } from "../src/viewmodel.js";

function frame(seq: number, tick: number, over: Partial<FrameMsg> = {}): FrameMsg {
  return {
    type: "FRAME",
    session_id: "s",
    schema_version: 1,
    seq,
    tick,
    time_s: tick * 0.01,
    paused: false,
    com: [0, 0.86, 0],
    vel: [0.5, 0, 0],
    mode: "walk",
    region: "inner",
    feet: [
      [0.1, 0, -0.1],
      [0.1, 0, 0.1],
    ],
    stance: [true, true],
    rest_lengths_m: [0.9, 0.9],
    joints: {},
    support: { circles: [], capsule: null },
    step_event: null,
    events: [],
    applied: [],
    torque_max_nm: 80,
    fallen: false,
    overload: false,
    ...over,
  };
}

const hello: HelloMsg = {
  type: "HELLO",
  session_id: "s",
  schema_version: 1,
  seq: 1,
  frame_every: 1,
  dt_s: 0.01,
  snapshot: {},
};

describe("sequence ordering", () => {
  it("drops anything whose seq does not increase", () => {
    const vm = new ViewModel();
    expect(vm.ingest(frame(5, 10))).toBe(true);
    expect(vm.ingest(frame(5, 11))).toBe(false);
    expect(vm.ingest(frame(3, 12))).toBe(false);
    expect(vm.frame?.tick).toBe(10);
    expect(vm.speedPlot).toHaveLength(1);
    expect(vm.ingest(frame(6, 11))).toBe(true);
    expect(vm.frame?.tick).toBe(11);
  });

  it("re-ingesting the same frame is a no-op, so a tick renders once", () => {
    const vm = new ViewModel();
    const msg = frame(2, 7);
    vm.ingest(msg);
    const plotLen = vm.speedPlot.length;
    expect(vm.ingest(msg)).toBe(false);
    expect(vm.speedPlot).toHaveLength(plotLen);
    expect(vm.frame).toBe(msg);
  });

  it("treats a tick moving backwards under a fresh seq as a session reset", () => {
    const vm = new ViewModel();
    vm.ingest(frame(1, 500, { step_event: { kind: "plant", target: [1, 0, 2] } }));
    vm.ingest(frame(2, 501));
    expect(vm.speedPlot).toHaveLength(2);
    expect(vm.lastStepTarget).not.toBeNull();

    vm.ingest(frame(3, 1));
    expect(vm.frame?.tick).toBe(1);
    expect(vm.speedPlot).toHaveLength(1);
    expect(vm.lastStepTarget).toBeNull();
    expect(vm.feed.map((e) => e.kind)).toEqual(["info"]);
  });
});

describe("frame ingestion", () => {
  it("stores HELLO and turns ERROR into a feed entry", () => {
    const vm = new ViewModel();
    vm.ingest(hello);
    expect(vm.hello?.frame_every).toBe(1);
    const err: ErrorMsg = {
      type: "ERROR",
      session_id: "s",
      schema_version: 1,
      seq: 2,
      error: "unknown command",
    };
    vm.ingest(err);
    expect(vm.feed.at(-1)).toMatchObject({ kind: "error", text: "unknown command" });
  });

  it("logs a step event and keeps the planned target", () => {
    const vm = new ViewModel();
    vm.ingest(frame(1, 3, { step_event: { kind: "exchange", target: [0.4, 0, 0.1] } }));
    expect(vm.feed.at(-1)?.kind).toBe("step");
    expect(vm.feed.at(-1)?.text).toContain("exchange");
    expect(vm.lastStepTarget?.target).toEqual([0.4, 0, 0.1]);
  });

  it("feeds the fall only on the rising edge", () => {
    const vm = new ViewModel();
    vm.ingest(frame(1, 1));
    vm.ingest(frame(2, 2, { fallen: true }));
    vm.ingest(frame(3, 3, { fallen: true }));
    expect(vm.feed.filter((e) => e.kind === "fall")).toHaveLength(1);
  });

  it("tracks speed with a bounded plot buffer", () => {
    const vm = new ViewModel();
    vm.ingest(frame(1, 1, { vel: [3, 9, 4] }));
    expect(vm.speedPlot[0].v).toBeCloseTo(5); // ground speed only
    for (let i = 2; i <= 1400; i++) vm.ingest(frame(i, i));
    expect(vm.speedPlot).toHaveLength(1200);
    expect(vm.speedPlot[0].t).toBeCloseTo((1400 - 1200 + 1) * 0.01);
  });

  it("caps the event feed", () => {
    const vm = new ViewModel();
    for (let i = 1; i <= 60; i++) vm.ingest(frame(i, i, { overload: true }));
    expect(vm.feed).toHaveLength(50);
    expect(vm.feed.every((e) => e.kind === "overload")).toBe(true);
  });
});

describe("commands and connection state", () => {
  it("marks setpoints pending until a frame echoes them back", () => {
    const vm = new ViewModel();
    const sent: string[] = [];
    vm.connected((t) => sent.push(t));
    vm.send(buildSetSpeed(1.2));
    expect(sent).toHaveLength(1);
    expect(vm.pending.has("SET_SPEED")).toBe(true);

    vm.ingest(frame(1, 40, { applied: [{ name: "SET_SPEED", tick: 40, mps: 1.2 }] }));
    expect(vm.pending.size).toBe(0);
  });

  it("never marks PAUSE pending: it has no echo to wait for", () => {
    const vm = new ViewModel();
    vm.connected(() => {});
    vm.send(buildPause());
    expect(vm.pending.size).toBe(0);
  });

  it("queues commands while offline and flushes them in order on connect", () => {
    const vm = new ViewModel();
    vm.send(buildSetSpeed(0.5));
    const push = buildPush(1, 0, 300);
    expect(push).not.toBeNull();
    vm.send(push!);
    expect(vm.queuedCount).toBe(2);
    expect(vm.connection).toBe("connecting");

    const sent: string[] = [];
    vm.connected((t) => sent.push(t));
    expect(vm.connection).toBe("open");
    expect(vm.queuedCount).toBe(0);
    expect(sent.map((t) => JSON.parse(t).name)).toEqual(["SET_SPEED", "PUSH"]);

    vm.disconnected();
    expect(vm.connection).toBe("closed");
    vm.send(buildSetSpeed(2));
    expect(vm.queuedCount).toBe(1);
  });

  it("holds a schema error until the next successful connect", () => {
    const vm = new ViewModel();
    vm.failSchema("schema_version 2 (viewer speaks 1)");
    expect(vm.schemaError).toContain("schema_version 2");
    vm.connected(() => {});
    expect(vm.schemaError).toBeNull();
  });
});
