/** Orbit camera and the two projections the renderer uses: a perspective
 * view of the world and a planar top-down inset for the support geometry.
 * Pure math, no canvas types.
 */

import { Vec2, Vec3 } from "./protocol.js";

export interface OrbitCamera {
  /** azimuth around +y, 0 looks down -z toward the target */
  yaw: number;
  /** elevation above the horizontal, clamped away from the poles */
  pitch: number;
  distance: number;
  target: Vec3;
}

export interface Viewport {
  width: number;
  height: number;
  /** vertical field of view in radians */
  fovY: number;
}

export interface Projected {
  x: number;
  y: number;
  /** camera-space depth, larger is farther */
  depth: number;
}

const PITCH_LIMIT = Math.PI / 2 - 0.05;
const MIN_DISTANCE = 0.5;
const MAX_DISTANCE = 30;

export function defaultCamera(): OrbitCamera {
  return { yaw: 0.6, pitch: 0.35, distance: 4.5, target: [0, 0.9, 0] };
}

export function orbit(cam: OrbitCamera, dYaw: number, dPitch: number): OrbitCamera {
  return {
    ...cam,
    yaw: cam.yaw + dYaw,
    pitch: Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, cam.pitch + dPitch)),
  };
}

export function zoom(cam: OrbitCamera, factor: number): OrbitCamera {
  return {
    ...cam,
    distance: Math.min(MAX_DISTANCE, Math.max(MIN_DISTANCE, cam.distance * factor)),
  };
}

export function cameraPosition(cam: OrbitCamera): Vec3 {
  const cp = Math.cos(cam.pitch);
  return [
    cam.target[0] + cam.distance * cp * Math.sin(cam.yaw),
    cam.target[1] + cam.distance * Math.sin(cam.pitch),
    cam.target[2] + cam.distance * cp * Math.cos(cam.yaw),
  ];
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  return n < 1e-12 ? [0, 0, 0] : [v[0] / n, v[1] / n, v[2] / n];
}

/** World point to canvas pixel; null when at or behind the camera plane. */
export function project(cam: OrbitCamera, vp: Viewport, p: Vec3): Projected | null {
  const eye = cameraPosition(cam);
  const forward = normalize(sub(cam.target, eye));
  const right = normalize(cross(forward, [0, 1, 0]));
  const up = cross(right, forward);

  const rel = sub(p, eye);
  const depth = dot(rel, forward);
  if (depth < 1e-6) return null;
  const fy = (vp.height / 2) / Math.tan(vp.fovY / 2);
  return {
    x: vp.width / 2 + (dot(rel, right) / depth) * fy,
    y: vp.height / 2 - (dot(rel, up) / depth) * fy,
    depth,
  };
}

export interface InsetLayout {
  /** top-left corner of the inset on the canvas */
  x: number;
  y: number;
  size: number;
  /** world meters shown across the inset */
  spanM: number;
  /** ground point at the inset center */
  center: Vec2;
}

/** Ground-plane point (world x,z) to inset pixel. Top of the inset is -z,
 * matching a map view of the world from above. */
export function toInset(layout: InsetLayout, g: Vec2): { x: number; y: number } {
  const scale = layout.size / layout.spanM;
  return {
    x: layout.x + layout.size / 2 + (g[0] - layout.center[0]) * scale,
    y: layout.y + layout.size / 2 + (g[1] - layout.center[1]) * scale,
  };
}

export function insetScale(layout: InsetLayout): number {
  return layout.size / layout.spanM;
}

/** Canvas drag (pixels) to a world-space ground direction, relative to the
 * camera yaw, for turning a mouse drag into a push. */
export function dragToGround(cam: OrbitCamera, dxPx: number, dyPx: number): Vec2 {
  // screen right maps to the camera's right on the ground; screen up maps
  // to walking away from the camera
  const sy = Math.sin(cam.yaw);
  const cy = Math.cos(cam.yaw);
  const rightG: Vec2 = [cy, -sy];
  const awayG: Vec2 = [-sy, -cy];
  return [
    dxPx * rightG[0] - dyPx * awayG[0],
    dxPx * rightG[1] - dyPx * awayG[1],
  ];
}
