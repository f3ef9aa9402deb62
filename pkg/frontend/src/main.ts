/** Entry point: wires the socket to the view model, the view model to the
 * canvas, and the control panel to outgoing commands. Single-threaded and
 * event-driven: socket callbacks only enqueue state, rendering happens on
 * the animation clock, and nothing here simulates anything.
 */

import {
  ProtocolError,
  buildPause,
  buildPush,
  buildReset,
  buildResume,
  buildSetBoxMass,
  buildSetDirection,
  buildSetLegScale,
  buildSetSpeed,
  buildTilt,
  parseServerMessage,
} from "./protocol.js";
import { defaultCamera, dragToGround, orbit, zoom } from "./projection.js";
import { PushPreview, renderScene } from "./render.js";
import { ViewModel } from "./viewmodel.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d");
if (!ctx) throw new Error("no 2d context");

const vm = new ViewModel();
let cam = defaultCamera();
let pushPreview: PushPreview | null = null;
let socket: WebSocket | null = null;
let reconnectDelayMs = 1000;
let reconnectTimer: number | null = null;
let wantConnection = false;

// ----------------------------------------------------------------- socket

function defaultUrl(): string {
  const q = new URLSearchParams(location.search).get("ws");
  if (q) return q;
  const host = location.hostname || "127.0.0.1";
  return `ws://${host}:8765/ws`;
}

function connect(): void {
  const url = ($<HTMLInputElement>("service-url")).value;
  wantConnection = true;
  vm.connection = "connecting";
  socket = new WebSocket(url);
  socket.onopen = () => {
    reconnectDelayMs = 1000;
    const s = socket;
    if (s) vm.connected((text) => s.send(text));
  };
  socket.onmessage = (ev) => {
    if (vm.schemaError) return; // banner up: stream stays paused
    try {
      vm.ingest(parseServerMessage(String(ev.data)));
    } catch (err) {
      if (err instanceof ProtocolError) {
        vm.failSchema(err.message);
        socket?.close();
      } else {
        throw err;
      }
    }
  };
  socket.onclose = () => {
    vm.disconnected();
    socket = null;
    if (wantConnection && !vm.schemaError && reconnectTimer === null) {
      reconnectTimer = window.setTimeout(() => {
        reconnectTimer = null;
        connect();
      }, reconnectDelayMs);
      reconnectDelayMs = Math.min(reconnectDelayMs * 2, 5000);
    }
  };
}

function disconnect(): void {
  wantConnection = false;
  if (reconnectTimer !== null) {
    clearTimeout(reconnectTimer);
    reconnectTimer = null;
  }
  socket?.close();
}

// --------------------------------------------------------------- controls

function bindSlider(
  id: string,
  labelId: string,
  fmt: (v: number) => string,
  onCommit: (v: number) => void,
): void {
  const input = $<HTMLInputElement>(id);
  const label = $<HTMLElement>(labelId);
  label.textContent = fmt(Number(input.value));
  input.addEventListener("input", () => {
    label.textContent = fmt(Number(input.value));
  });
  input.addEventListener("change", () => onCommit(Number(input.value)));
}

bindSlider("speed", "speed-label", (v) => `${v.toFixed(1)} m/s`, (v) =>
  vm.send(buildSetSpeed(v)),
);
bindSlider("direction", "direction-label", (v) => `${v.toFixed(0)} deg`, (v) =>
  vm.send(buildSetDirection((v * Math.PI) / 180)),
);
bindSlider("tilt-x", "tilt-x-label", (v) => `${v.toFixed(0)} deg`, (v) =>
  vm.send(buildTilt("x", (v * Math.PI) / 180)),
);
bindSlider("tilt-z", "tilt-z-label", (v) => `${v.toFixed(0)} deg`, (v) =>
  vm.send(buildTilt("z", (v * Math.PI) / 180)),
);
bindSlider("box-mass", "box-mass-label", (v) => `${v.toFixed(0)} kg`, (v) =>
  vm.send(buildSetBoxMass(v)),
);
bindSlider("leg-scale", "leg-scale-label", (v) => `${v.toFixed(2)}x`, (v) =>
  vm.send(buildSetLegScale(v)),
);
bindSlider("push-mag", "push-mag-label", (v) => `${v.toFixed(0)} N`, () => {});

let paused = false;
$<HTMLButtonElement>("pause").addEventListener("click", () => {
  paused = !paused;
  vm.send(paused ? buildPause() : buildResume());
  $<HTMLButtonElement>("pause").textContent = paused ? "resume" : "pause";
});
$<HTMLButtonElement>("reset").addEventListener("click", () => {
  vm.send(buildReset(Math.floor(Math.random() * 1e6)));
});
$<HTMLButtonElement>("reset-overlay").addEventListener("click", () => {
  vm.send(buildReset(Math.floor(Math.random() * 1e6)));
});
$<HTMLButtonElement>("connect").addEventListener("click", () => {
  if (wantConnection) {
    disconnect();
    $<HTMLButtonElement>("connect").textContent = "connect";
  } else {
    connect();
    $<HTMLButtonElement>("connect").textContent = "disconnect";
  }
});

// ------------------------------------------------------------ canvas input

// left-drag pushes the character, right-drag (or shift) orbits, wheel zooms
let drag: { x: number; y: number; mode: "push" | "orbit" } | null = null;

canvas.addEventListener("contextmenu", (e) => e.preventDefault());
canvas.addEventListener("mousedown", (e) => {
  const mode = e.button === 2 || e.shiftKey ? "orbit" : "push";
  drag = { x: e.offsetX, y: e.offsetY, mode };
});
canvas.addEventListener("mousemove", (e) => {
  if (!drag) return;
  if (drag.mode === "orbit") {
    cam = orbit(cam, -(e.offsetX - drag.x) * 0.008, (e.offsetY - drag.y) * 0.006);
    drag.x = e.offsetX;
    drag.y = e.offsetY;
    return;
  }
  const dir = dragToGround(cam, e.offsetX - drag.x, e.offsetY - drag.y);
  const px = Math.hypot(e.offsetX - drag.x, e.offsetY - drag.y);
  pushPreview = px < 4 ? null : { dir, magnitudeN: Number($<HTMLInputElement>("push-mag").value) };
});
window.addEventListener("mouseup", () => {
  if (drag?.mode === "push" && pushPreview) {
    const cmd = buildPush(pushPreview.dir[0], pushPreview.dir[1], pushPreview.magnitudeN);
    if (cmd) vm.send(cmd);
  }
  drag = null;
  pushPreview = null;
});
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  cam = zoom(cam, e.deltaY > 0 ? 1.1 : 0.9);
});

// ------------------------------------------------------------- render loop

const feedEl = $<HTMLUListElement>("feed");
const statusEl = $<HTMLElement>("status");
const bannerEl = $<HTMLElement>("banner");
const fallenEl = $<HTMLElement>("fallen-overlay");

function resizeCanvas(): void {
  const rect = canvas.parentElement!.getBoundingClientRect();
  canvas.width = rect.width;
  canvas.height = rect.height;
}
window.addEventListener("resize", resizeCanvas);
resizeCanvas();

let renderedFeedLen = -1;
let renderedSeq = -1;

function statusLine(): string {
  const f = vm.frame;
  const conn =
    vm.connection === "open"
      ? "live"
      : vm.connection === "connecting"
        ? "connecting..."
        : `offline${vm.queuedCount ? ` (${vm.queuedCount} queued)` : ""}`;
  if (!f) return conn;
  const pend = vm.pending.size ? `  pending: ${[...vm.pending.keys()].join(",")}` : "";
  return (
    `${conn}  t=${f.time_s.toFixed(2)}s tick=${f.tick}  mode=${f.mode}` +
    `  region=${f.region ?? "-"}  tau=${f.torque_max_nm.toFixed(0)}Nm` +
    `${f.paused ? "  PAUSED" : ""}${f.overload ? "  OVERLOAD" : ""}${pend}`
  );
}

function tickUi(): void {
  // camera follows the character; render is idempotent per (seq, camera)
  if (vm.frame) {
    cam = { ...cam, target: [vm.frame.com[0], 0.9, vm.frame.com[2]] };
  }
  renderScene(ctx!, vm, cam, {
    width: canvas.width,
    height: canvas.height,
    pushPreview,
  });
  renderedSeq = vm.lastSeq;

  statusEl.textContent = statusLine();
  bannerEl.style.display = vm.schemaError ? "block" : "none";
  if (vm.schemaError) bannerEl.textContent = `schema mismatch: ${vm.schemaError} (stream paused)`;
  fallenEl.style.display = vm.frame?.fallen ? "flex" : "none";

  if (vm.feed.length !== renderedFeedLen) {
    renderedFeedLen = vm.feed.length;
    feedEl.innerHTML = "";
    for (const ev of vm.feed.slice(-12).reverse()) {
      const li = document.createElement("li");
      li.className = ev.kind;
      li.textContent = `${ev.timeS.toFixed(2)}s  ${ev.text}`;
      feedEl.appendChild(li);
    }
  }
  requestAnimationFrame(tickUi);
}

$<HTMLInputElement>("service-url").value = defaultUrl();
requestAnimationFrame(tickUi);
export { renderedSeq };
