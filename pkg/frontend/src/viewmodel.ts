/** View model: everything the renderer reads, nothing the socket owns.
 *
 * Socket callbacks push parsed messages in through ingest(); the render
 * loop reads the fields. The model renders only what arrived in frames:
 * there is no client-side prediction. Sequence numbers must strictly
 * increase; anything older is dropped. A tick that moves backwards under
 * an increasing seq is a session reset, which restarts the timeline.
 */

import {
  Command,
  FrameMsg,
  HelloMsg,
  ServerMessage,
  Vec3,
  serializeCommand,
} from "./protocol.js";

export interface FeedEvent {
  kind: "step" | "fall" | "error" | "overload" | "info";
  text: string;
  timeS: number;
}

export interface PlotPoint {
  t: number;
  v: number;
}

const FEED_CAP = 50;
const PLOT_CAP = 1200;

type Sink = (text: string) => void;

export class ViewModel {
  hello: HelloMsg | null = null;
  frame: FrameMsg | null = null;
  lastSeq = 0;
  schemaError: string | null = null;
  connection: "connecting" | "open" | "closed" = "connecting";

  feed: FeedEvent[] = [];
  speedPlot: PlotPoint[] = [];
  /** setpoints sent but not yet echoed back in a frame, keyed by command name */
  pending = new Map<string, Command>();
  /** most recent planned foot target, kept so the marker outlives one frame */
  lastStepTarget: { target: Vec3; timeS: number } | null = null;

  private sink: Sink | null = null;
  private outbox: string[] = [];

  // ---------------------------------------------------------------- ingress

  /** Returns true when the message changed state (false: dropped). */
  ingest(msg: ServerMessage): boolean {
    if (msg.seq <= this.lastSeq) return false;
    this.lastSeq = msg.seq;
    switch (msg.type) {
      case "HELLO":
        this.hello = msg;
        return true;
      case "ERROR":
        this.pushEvent("error", msg.error);
        return true;
      case "FRAME":
        this.ingestFrame(msg);
        return true;
    }
  }

  private ingestFrame(msg: FrameMsg): void {
    const prev = this.frame;
    if (prev && msg.tick < prev.tick) {
      // session reset: the stream rewound, so the plot and feed restart
      this.speedPlot = [];
      this.feed = [];
      this.lastStepTarget = null;
      this.pushEvent("info", "session reset", msg.time_s);
    }
    this.frame = msg;

    for (const cmd of msg.applied) this.pending.delete(cmd.name);

    if (msg.step_event !== null) {
      const kind = typeof msg.step_event.kind === "string" ? msg.step_event.kind : "step";
      this.pushEvent("step", `step (${kind})`, msg.time_s);
      const target = msg.step_event.target;
      if (Array.isArray(target) && target.length === 3) {
        this.lastStepTarget = { target: target as Vec3, timeS: msg.time_s };
      }
    }
    if (msg.fallen && !(prev && prev.fallen)) {
      this.pushEvent("fall", "FALLEN", msg.time_s);
    }
    if (msg.overload) {
      this.pushEvent("overload", "sim overloaded: clock resynced", msg.time_s);
    }

    this.speedPlot.push({ t: msg.time_s, v: Math.hypot(msg.vel[0], msg.vel[2]) });
    if (this.speedPlot.length > PLOT_CAP) {
      this.speedPlot.splice(0, this.speedPlot.length - PLOT_CAP);
    }
  }

  private pushEvent(kind: FeedEvent["kind"], text: string, timeS?: number): void {
    this.feed.push({ kind, text, timeS: timeS ?? this.frame?.time_s ?? 0 });
    if (this.feed.length > FEED_CAP) this.feed.splice(0, this.feed.length - FEED_CAP);
  }

  // ----------------------------------------------------------------- egress

  /** Serialize and send; while disconnected the command queues and the
   * caller shows the offline indicator until the next flush. */
  send(cmd: Command): void {
    const text = serializeCommand(cmd);
    if (cmd.name !== "PAUSE" && cmd.name !== "RESUME") {
      this.pending.set(cmd.name, cmd);
    }
    if (this.sink) {
      this.sink(text);
    } else {
      this.outbox.push(text);
    }
  }

  get queuedCount(): number {
    return this.outbox.length;
  }

  connected(sink: Sink): void {
    this.sink = sink;
    this.connection = "open";
    this.schemaError = null;
    for (const text of this.outbox.splice(0)) sink(text);
  }

  disconnected(): void {
    this.sink = null;
    this.connection = "closed";
  }

  /** A schema mismatch freezes the stream behind a banner; the socket
   * layer stops feeding frames until reconnect. */
  failSchema(detail: string): void {
    this.schemaError = detail;
  }
}
