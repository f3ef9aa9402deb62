import { describe, expect, it } from "vitest";

import {
  InsetLayout,
  OrbitCamera,
  Viewport,
  cameraPosition,
  defaultCamera,
  dragToGround,
  insetScale,
  orbit,
  project,
  toInset,
  zoom,
} from "../src/projection.js";

const vp: Viewport = { width: 800, height: 600, fovY: Math.PI / 2 };

function cam(over: Partial<OrbitCamera> = {}): OrbitCamera {
  return { yaw: 0, pitch: 0, distance: 3, target: [0, 1, 0], ...over };
}

describe("orbit camera", () => {
  it("sits behind the target along +z at yaw 0, pitch 0", () => {
    const eye = cameraPosition(cam());
    expect(eye[0]).toBeCloseTo(0);
    expect(eye[1]).toBeCloseTo(1);
    expect(eye[2]).toBeCloseTo(3);
  });

  it("clamps pitch away from the poles and distance to its range", () => {
    const limit = Math.PI / 2 - 0.05;
    expect(orbit(cam(), 0, 10).pitch).toBeCloseTo(limit);
    expect(orbit(cam(), 0, -10).pitch).toBeCloseTo(-limit);
    expect(orbit(cam(), 1.5, 0).yaw).toBeCloseTo(1.5);
    expect(zoom(cam(), 1e9).distance).toBe(30);
    expect(zoom(cam(), 1e-9).distance).toBe(0.5);
    expect(zoom(cam(), 2).distance).toBeCloseTo(6);
  });

  it("starts looking at standing height", () => {
    expect(defaultCamera().target[1]).toBeCloseTo(0.9);
  });
});

describe("perspective projection", () => {
  it("puts the look-at target at the viewport center", () => {
    const p = project(cam(), vp, [0, 1, 0]);
    expect(p).not.toBeNull();
    expect(p!.x).toBeCloseTo(400);
    expect(p!.y).toBeCloseTo(300);
    expect(p!.depth).toBeCloseTo(3);
  });

  it("maps world +x to screen right and world +y to screen up", () => {
    // camera on +z looking toward -z; fy = 300/tan(45 deg) = 300
    const right = project(cam(), vp, [1, 1, 0]);
    expect(right!.x).toBeCloseTo(400 + (1 / 3) * 300);
    expect(right!.y).toBeCloseTo(300);
    const up = project(cam(), vp, [0, 2, 0]);
    expect(up!.x).toBeCloseTo(400);
    expect(up!.y).toBeCloseTo(300 - (1 / 3) * 300);
  });

  it("orders depth by distance from the eye", () => {
    const near = project(cam(), vp, [0, 1, 1]);
    const far = project(cam(), vp, [0, 1, -1]);
    expect(near!.depth).toBeLessThan(far!.depth);
  });

  it("culls points at or behind the camera plane", () => {
    expect(project(cam(), vp, [0, 1, 3])).toBeNull();
    expect(project(cam(), vp, [0, 1, 4])).toBeNull();
  });
});

describe("top-down inset", () => {
  const layout: InsetLayout = { x: 10, y: 20, size: 180, spanM: 1.6, center: [2, 3] };

  it("maps the center point to the inset center", () => {
    expect(toInset(layout, [2, 3])).toEqual({ x: 100, y: 110 });
  });

  it("maps +x right and +z down at the meters-per-pixel scale", () => {
    expect(insetScale(layout)).toBeCloseTo(112.5);
    const east = toInset(layout, [2.8, 3]);
    expect(east.x).toBeCloseTo(190); // right edge: half a span east
    expect(east.y).toBeCloseTo(110);
    const south = toInset(layout, [2, 3.4]);
    expect(south.y).toBeCloseTo(110 + 0.4 * 112.5);
  });
});

describe("drag to ground push", () => {
  it("maps a rightward drag to the camera's right on the ground", () => {
    const g = dragToGround(cam({ yaw: 0 }), 10, 0);
    expect(g[0]).toBeCloseTo(10);
    expect(g[1]).toBeCloseTo(0);
  });

  it("maps an upward drag to walking away from the camera", () => {
    // camera sits on +z at yaw 0, so away is -z
    const g = dragToGround(cam({ yaw: 0 }), 0, -10);
    expect(g[0]).toBeCloseTo(0);
    expect(g[1]).toBeCloseTo(-10);
  });

  it("rotates with the camera yaw", () => {
    const g = dragToGround(cam({ yaw: Math.PI / 2 }), 10, 0);
    expect(g[0]).toBeCloseTo(0);
    expect(g[1]).toBeCloseTo(-10);
  });
});
