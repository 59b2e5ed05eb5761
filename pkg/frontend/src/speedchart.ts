/** Per-waypoint speed profile chart. */

import type { Ctx2D } from "./scene3d";
import type { SpeedSeries } from "./state";

const AXIS_COLOR = "#888888";

export function drawSpeedChart(
  ctx: Ctx2D,
  width: number,
  height: number,
  series: SpeedSeries[],
): void {
  ctx.clearRect(0, 0, width, height);
  const pad = 18;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;

  ctx.strokeStyle = AXIS_COLOR;
  ctx.lineWidth = 1;
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, pad + innerH);
  ctx.lineTo(pad + innerW, pad + innerH);
  ctx.stroke();

  for (const s of series) {
    if (s.values.length === 0) continue;
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.values.forEach((v, i) => {
      const x = pad + (innerW * i) / Math.max(1, s.values.length - 1);
      const y = pad + innerH * (1 - clamp01(v));
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export class SpeedChart {
  private series: SpeedSeries[] = [];

  constructor(private canvas: HTMLCanvasElement) {}

  setSeries(series: SpeedSeries[]): void {
    this.series = series;
    this.draw();
  }

  getSeries(): SpeedSeries[] {
    return this.series;
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d") as Ctx2D | null;
    if (!ctx) return;
    drawSpeedChart(ctx, this.canvas.width, this.canvas.height, this.series);
  }
}
