/** Orthographic 3D view with orbit control, drawn on a 2D canvas. */

import type { SceneObjectDto } from "./api";
import type { Polyline } from "./state";

export interface Camera {
  yaw: number; // radians around +z
  pitch: number; // radians above the ground plane
  zoom: number; // pixels per world unit
}

export const DEFAULT_CAMERA: Camera = { yaw: -0.7, pitch: 0.5, zoom: 160 };

/** World (x front, y left, z up) to screen, orthographic. */
export function project(
  p: [number, number, number],
  cam: Camera,
  width: number,
  height: number,
): [number, number] {
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  // rotate around z by yaw, then tilt by pitch; screen x is the rotated y
  const rx = cy * p[0] + sy * p[1];
  const ry = -sy * p[0] + cy * p[1];
  const rz = p[2];
  const sx = ry;
  const sz = cp * rz - sp * rx;
  return [width / 2 + sx * cam.zoom, height / 2 - sz * cam.zoom];
}

export interface SceneContent {
  objects: SceneObjectDto[];
  polylines: Polyline[];
  highlight: number[]; // per-object emphasis in [0, 1], e.g. similarity
}

/** Minimal slice of CanvasRenderingContext2D; tests pass a recorder. */
export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

const GRID_COLOR = "#d8d8e0";
const OBJECT_COLOR = "#444444";

export function drawScene(
  ctx: Ctx2D,
  width: number,
  height: number,
  cam: Camera,
  content: SceneContent,
): void {
  ctx.clearRect(0, 0, width, height);

  ctx.strokeStyle = GRID_COLOR;
  ctx.lineWidth = 1;
  ctx.setLineDash([]);
  for (let i = -4; i <= 4; i++) {
    const t = i / 4;
    line(ctx, [t, -1, -1], [t, 1, -1], cam, width, height);
    line(ctx, [-1, t, -1], [1, t, -1], cam, width, height);
  }

  for (const poly of content.polylines) {
    ctx.strokeStyle = poly.color;
    ctx.lineWidth = 2;
    ctx.setLineDash(poly.dashed ? [6, 4] : []);
    ctx.beginPath();
    poly.points.forEach((p, i) => {
      const [x, y] = project([p[0], p[1], p[2]], cam, width, height);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);

  ctx.font = "12px sans-serif";
  content.objects.forEach((obj, i) => {
    const [x, y] = project(obj.position, cam, width, height);
    const emphasis = content.highlight[i] ?? 0;
    ctx.fillStyle = OBJECT_COLOR;
    ctx.globalAlpha = 0.5 + 0.5 * emphasis;
    ctx.beginPath();
    ctx.arc(x, y, 4 + 4 * emphasis, 0, 2 * Math.PI);
    ctx.fill();
    ctx.globalAlpha = 1;
    ctx.fillText(obj.name, x + 8, y - 4);
  });
}

function line(
  ctx: Ctx2D,
  a: [number, number, number],
  b: [number, number, number],
  cam: Camera,
  width: number,
  height: number,
): void {
  const [x0, y0] = project(a, cam, width, height);
  const [x1, y1] = project(b, cam, width, height);
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
}

/** Wires pointer-drag orbit and wheel zoom onto a canvas. */
export class SceneView {
  cam: Camera = { ...DEFAULT_CAMERA };
  private content: SceneContent = {
    objects: [],
    polylines: [],
    highlight: [],
  };
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(private canvas: HTMLCanvasElement) {
    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      this.cam.yaw += (e.clientX - this.lastX) * 0.01;
      this.cam.pitch = clamp(
        this.cam.pitch + (e.clientY - this.lastY) * 0.01,
        -1.4,
        1.4,
      );
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      this.draw();
    });
    canvas.addEventListener("pointerup", () => (this.dragging = false));
    canvas.addEventListener("pointerleave", () => (this.dragging = false));
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.cam.zoom = clamp(this.cam.zoom * (e.deltaY < 0 ? 1.1 : 0.9), 40, 800);
      this.draw();
    });
  }

  setContent(content: SceneContent): void {
    this.content = content;
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d") as Ctx2D | null;
    if (!ctx) return;
    drawScene(ctx, this.canvas.width, this.canvas.height, this.cam, this.content);
  }
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}
