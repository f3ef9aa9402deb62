/** Canvas renderer: perspective world view, top-down support inset, and a
 * speed strip chart. A pure function of the view model and camera; calling
 * it twice with the same frame paints the same scene.
 */

import { FrameMsg, Vec2, Vec3 } from "./protocol.js";
import {
  InsetLayout,
  OrbitCamera,
  Viewport,
  insetScale,
  project,
  toInset,
} from "./projection.js";
import { ViewModel } from "./viewmodel.js";

/** child -> parent pairs of the rig the service streams */
export const BONES: ReadonlyArray<readonly [string, string]> = [
  ["hip_l", "pelvis"],
  ["knee_l", "hip_l"],
  ["ankle_l", "knee_l"],
  ["toe_l", "ankle_l"],
  ["hip_r", "pelvis"],
  ["knee_r", "hip_r"],
  ["ankle_r", "knee_r"],
  ["toe_r", "ankle_r"],
  ["spine1", "pelvis"],
  ["spine2", "spine1"],
  ["neck", "spine2"],
  ["head_top", "neck"],
  ["shoulder_l", "spine2"],
  ["elbow_l", "shoulder_l"],
  ["hand_l", "elbow_l"],
  ["shoulder_r", "spine2"],
  ["elbow_r", "shoulder_r"],
  ["hand_r", "elbow_r"],
];

/** matches the service's default inner fraction of the support radius */
export const INNER_FRACTION = 0.6;

export const REGION_COLORS: Record<string, string> = {
  inner: "#37b24d",
  margin: "#f59f00",
  outside: "#f03e3e",
  none: "#868e96",
};

const BG = "#11151a";
const GRID = "#242c35";
const BONE = "#dee2e6";
const SWING_FOOT = "#748ffc";
const STANCE_FOOT = "#51cf66";

export interface PushPreview {
  /** ground direction of the pending drag, not normalized */
  dir: Vec2;
  magnitudeN: number;
}

export interface SceneOptions {
  width: number;
  height: number;
  pushPreview: PushPreview | null;
}

function groundOf(f: FrameMsg): Vec2 {
  return [f.com[0], f.com[2]];
}

export function renderScene(
  ctx: CanvasRenderingContext2D,
  vm: ViewModel,
  cam: OrbitCamera,
  opts: SceneOptions,
): void {
  const vp: Viewport = { width: opts.width, height: opts.height, fovY: Math.PI / 4 };
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, vp.width, vp.height);

  const frame = vm.frame;
  if (!frame) {
    ctx.fillStyle = "#868e96";
    ctx.font = "14px ui-monospace, monospace";
    ctx.textAlign = "center";
    ctx.fillText("waiting for frames...", vp.width / 2, vp.height / 2);
    ctx.textAlign = "left";
    return;
  }

  drawGrid(ctx, cam, vp, frame);
  drawSupportPerspective(ctx, cam, vp, frame);
  drawStepTarget(ctx, cam, vp, vm, frame);
  drawSkeleton(ctx, cam, vp, frame);
  drawCom(ctx, cam, vp, frame);
  if (opts.pushPreview) drawPushPreview(ctx, cam, vp, frame, opts.pushPreview);

  const inset: InsetLayout = {
    x: vp.width - 196,
    y: vp.height - 196,
    size: 180,
    spanM: 1.6,
    center: groundOf(frame),
  };
  drawInset(ctx, inset, vm, frame);
  drawStripChart(ctx, vm, { x: 16, y: vp.height - 116, w: 280, h: 100 });
}

// ------------------------------------------------------------- world layers

function line3(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  a: Vec3,
  b: Vec3,
): void {
  const pa = project(cam, vp, a);
  const pb = project(cam, vp, b);
  if (!pa || !pb) return;
  ctx.beginPath();
  ctx.moveTo(pa.x, pa.y);
  ctx.lineTo(pb.x, pb.y);
  ctx.stroke();
}

function drawGrid(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  frame: FrameMsg,
): void {
  const cx = Math.round(frame.com[0]);
  const cz = Math.round(frame.com[2]);
  ctx.strokeStyle = GRID;
  ctx.lineWidth = 1;
  for (let i = -4; i <= 4; i++) {
    line3(ctx, cam, vp, [cx + i, 0, cz - 4], [cx + i, 0, cz + 4]);
    line3(ctx, cam, vp, [cx - 4, 0, cz + i], [cx + 4, 0, cz + i]);
  }
}

function groundLoop(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  points: Vec2[],
): void {
  ctx.beginPath();
  let started = false;
  for (const g of points) {
    const p = project(cam, vp, [g[0], 0, g[1]]);
    if (!p) continue;
    if (!started) {
      ctx.moveTo(p.x, p.y);
      started = true;
    } else {
      ctx.lineTo(p.x, p.y);
    }
  }
  if (started) {
    ctx.closePath();
    ctx.fill();
  }
}

function circlePoints(center: Vec2, radius: number, n = 32): Vec2[] {
  const out: Vec2[] = [];
  for (let i = 0; i < n; i++) {
    const a = (i / n) * 2 * Math.PI;
    out.push([center[0] + radius * Math.cos(a), center[1] + radius * Math.sin(a)]);
  }
  return out;
}

function capsulePoints(a: Vec2, b: Vec2, radius: number, n = 12): Vec2[] {
  const axis = Math.atan2(b[1] - a[1], b[0] - a[0]);
  const out: Vec2[] = [];
  for (let i = 0; i <= n; i++) {
    const t = axis + Math.PI / 2 + (i / n) * Math.PI;
    out.push([a[0] + radius * Math.cos(t), a[1] + radius * Math.sin(t)]);
  }
  for (let i = 0; i <= n; i++) {
    const t = axis - Math.PI / 2 + (i / n) * Math.PI;
    out.push([b[0] + radius * Math.cos(t), b[1] + radius * Math.sin(t)]);
  }
  return out;
}

function drawSupportPerspective(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  frame: FrameMsg,
): void {
  const sup = frame.support;
  if (!sup) return;
  // margin band first (full radius), inner discs on top
  ctx.fillStyle = "rgba(245, 159, 0, 0.18)";
  if (sup.capsule) groundLoop(ctx, cam, vp, capsulePoints(sup.capsule.a, sup.capsule.b, sup.capsule.radius));
  for (const c of sup.circles) groundLoop(ctx, cam, vp, circlePoints(c.center, c.radius));
  ctx.fillStyle = "rgba(55, 178, 77, 0.25)";
  if (sup.capsule) {
    groundLoop(
      ctx,
      cam,
      vp,
      capsulePoints(sup.capsule.a, sup.capsule.b, sup.capsule.radius * INNER_FRACTION),
    );
  }
  for (const c of sup.circles) {
    groundLoop(ctx, cam, vp, circlePoints(c.center, c.radius * INNER_FRACTION));
  }
}

function drawSkeleton(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  frame: FrameMsg,
): void {
  ctx.strokeStyle = BONE;
  ctx.lineWidth = 2.5;
  ctx.lineCap = "round";
  for (const [child, parent] of BONES) {
    const a = frame.joints[child];
    const b = frame.joints[parent];
    if (a && b) line3(ctx, cam, vp, a, b);
  }
  ctx.lineWidth = 1;
  frame.feet.forEach((foot, i) => {
    const p = project(cam, vp, foot);
    if (!p) return;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 5, 0, 2 * Math.PI);
    if (frame.stance[i]) {
      ctx.fillStyle = STANCE_FOOT;
      ctx.fill();
    } else {
      ctx.strokeStyle = SWING_FOOT;
      ctx.lineWidth = 2;
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  });
}

function drawCom(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  frame: FrameMsg,
): void {
  const color = REGION_COLORS[frame.region ?? "none"] ?? REGION_COLORS.none;
  const com = project(cam, vp, frame.com);
  const comGround = project(cam, vp, [frame.com[0], 0, frame.com[2]]);
  if (com && comGround) {
    ctx.strokeStyle = color;
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(com.x, com.y);
    ctx.lineTo(comGround.x, comGround.y);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  if (com) {
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(com.x, com.y, 6, 0, 2 * Math.PI);
    ctx.fill();
  }
  // velocity arrow along the ground
  const v: Vec2 = [frame.vel[0], frame.vel[2]];
  const speed = Math.hypot(v[0], v[1]);
  if (speed > 0.05 && comGround) {
    const tip = project(cam, vp, [
      frame.com[0] + (v[0] / speed) * Math.min(speed, 2) * 0.5,
      0,
      frame.com[2] + (v[1] / speed) * Math.min(speed, 2) * 0.5,
    ]);
    if (tip) {
      ctx.strokeStyle = "#74c0fc";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(comGround.x, comGround.y);
      ctx.lineTo(tip.x, tip.y);
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  }
}

function drawStepTarget(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  vm: ViewModel,
  frame: FrameMsg,
): void {
  const marker = vm.lastStepTarget;
  if (!marker || frame.time_s - marker.timeS > 1.5) return;
  const p = project(cam, vp, marker.target);
  if (!p) return;
  ctx.strokeStyle = "#ffd43b";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(p.x - 7, p.y);
  ctx.lineTo(p.x + 7, p.y);
  ctx.moveTo(p.x, p.y - 7);
  ctx.lineTo(p.x, p.y + 7);
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawPushPreview(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  vp: Viewport,
  frame: FrameMsg,
  preview: PushPreview,
): void {
  const len = Math.hypot(preview.dir[0], preview.dir[1]);
  if (len < 1e-9) return;
  const scale = 0.004 * preview.magnitudeN;
  const from: Vec3 = [
    frame.com[0] - (preview.dir[0] / len) * scale,
    frame.com[1],
    frame.com[2] - (preview.dir[1] / len) * scale,
  ];
  const pa = project(cam, vp, from);
  const pb = project(cam, vp, frame.com);
  if (!pa || !pb) return;
  ctx.strokeStyle = "#ff8787";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(pa.x, pa.y);
  ctx.lineTo(pb.x, pb.y);
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#ff8787";
  ctx.font = "12px ui-monospace, monospace";
  ctx.fillText(`${preview.magnitudeN.toFixed(0)} N`, pa.x + 6, pa.y - 6);
}

// -------------------------------------------------------------------- inset

function drawInset(
  ctx: CanvasRenderingContext2D,
  layout: InsetLayout,
  vm: ViewModel,
  frame: FrameMsg,
): void {
  ctx.save();
  ctx.fillStyle = "rgba(17, 21, 26, 0.92)";
  ctx.strokeStyle = "#343f4b";
  ctx.fillRect(layout.x, layout.y, layout.size, layout.size);
  ctx.strokeRect(layout.x, layout.y, layout.size, layout.size);
  ctx.beginPath();
  ctx.rect(layout.x, layout.y, layout.size, layout.size);
  ctx.clip();

  const scale = insetScale(layout);
  const sup = frame.support;

  const fillCircle = (center: Vec2, radius: number) => {
    const p = toInset(layout, center);
    ctx.beginPath();
    ctx.arc(p.x, p.y, radius * scale, 0, 2 * Math.PI);
    ctx.fill();
  };

  if (sup) {
    ctx.fillStyle = "rgba(245, 159, 0, 0.25)";
    if (sup.capsule) {
      const a = toInset(layout, sup.capsule.a);
      const b = toInset(layout, sup.capsule.b);
      ctx.lineWidth = 2 * sup.capsule.radius * scale;
      ctx.strokeStyle = "rgba(245, 159, 0, 0.25)";
      ctx.lineCap = "round";
      ctx.beginPath();
      ctx.moveTo(a.x, a.y);
      ctx.lineTo(b.x, b.y);
      ctx.stroke();
    }
    for (const c of sup.circles) fillCircle(c.center, c.radius);
    ctx.fillStyle = "rgba(55, 178, 77, 0.35)";
    if (sup.capsule) {
      const a = toInset(layout, sup.capsule.a);
      const b = toInset(layout, sup.capsule.b);
      ctx.lineWidth = 2 * sup.capsule.radius * INNER_FRACTION * scale;
      ctx.strokeStyle = "rgba(55, 178, 77, 0.35)";
      ctx.beginPath();
      ctx.moveTo(a.x, a.y);
      ctx.lineTo(b.x, b.y);
      ctx.stroke();
    }
    for (const c of sup.circles) fillCircle(c.center, c.radius * INNER_FRACTION);
    ctx.lineWidth = 1;
    ctx.lineCap = "butt";
  }

  frame.feet.forEach((foot, i) => {
    const p = toInset(layout, [foot[0], foot[2]]);
    ctx.fillStyle = frame.stance[i] ? STANCE_FOOT : SWING_FOOT;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
    ctx.fill();
  });

  const marker = vm.lastStepTarget;
  if (marker && frame.time_s - marker.timeS <= 1.5) {
    const p = toInset(layout, [marker.target[0], marker.target[2]]);
    ctx.strokeStyle = "#ffd43b";
    ctx.beginPath();
    ctx.moveTo(p.x - 5, p.y);
    ctx.lineTo(p.x + 5, p.y);
    ctx.moveTo(p.x, p.y - 5);
    ctx.lineTo(p.x, p.y + 5);
    ctx.stroke();
  }

  const com = toInset(layout, [frame.com[0], frame.com[2]]);
  ctx.fillStyle = REGION_COLORS[frame.region ?? "none"] ?? REGION_COLORS.none;
  ctx.beginPath();
  ctx.arc(com.x, com.y, 4, 0, 2 * Math.PI);
  ctx.fill();

  const speed = Math.hypot(frame.vel[0], frame.vel[2]);
  if (speed > 0.05) {
    ctx.strokeStyle = "#74c0fc";
    ctx.beginPath();
    ctx.moveTo(com.x, com.y);
    ctx.lineTo(
      com.x + (frame.vel[0] / speed) * Math.min(speed, 2) * 0.4 * scale,
      com.y + (frame.vel[2] / speed) * Math.min(speed, 2) * 0.4 * scale,
    );
    ctx.stroke();
  }

  ctx.fillStyle = "#868e96";
  ctx.font = "10px ui-monospace, monospace";
  ctx.fillText("top-down", layout.x + 6, layout.y + 14);
  ctx.restore();
}

// -------------------------------------------------------------- strip chart

export interface ChartLayout {
  x: number;
  y: number;
  w: number;
  h: number;
}

function drawStripChart(ctx: CanvasRenderingContext2D, vm: ViewModel, box: ChartLayout): void {
  ctx.fillStyle = "rgba(17, 21, 26, 0.92)";
  ctx.strokeStyle = "#343f4b";
  ctx.fillRect(box.x, box.y, box.w, box.h);
  ctx.strokeRect(box.x, box.y, box.w, box.h);

  const pts = vm.speedPlot;
  ctx.fillStyle = "#868e96";
  ctx.font = "10px ui-monospace, monospace";
  ctx.fillText("speed [m/s]", box.x + 6, box.y + 12);
  if (pts.length < 2) return;

  const t1 = pts[pts.length - 1].t;
  const t0 = Math.max(pts[0].t, t1 - 12);
  const vMax = Math.max(2, ...pts.map((p) => p.v)) * 1.1;
  ctx.strokeStyle = "#4dabf7";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let started = false;
  for (const p of pts) {
    if (p.t < t0) continue;
    const x = box.x + ((p.t - t0) / Math.max(t1 - t0, 1e-9)) * box.w;
    const y = box.y + box.h - (p.v / vMax) * (box.h - 16);
    if (!started) {
      ctx.moveTo(x, y);
      started = true;
    } else {
      ctx.lineTo(x, y);
    }
  }
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#4dabf7";
  ctx.fillText(pts[pts.length - 1].v.toFixed(2), box.x + box.w - 40, box.y + 12);
}
