/** Attention heatmap panel: encoder map plus per-layer decoder maps, with
 * the waypoint/object block boundary delineated. */

import type { AttentionDto } from "./api";
import type { Ctx2D } from "./scene3d";

export type MapKind = "encoder" | "decoder_self" | "decoder_cross";

export interface HeatmapSelection {
  kind: MapKind;
  layer: number;
}

export function drawHeatmap(
  ctx: Ctx2D,
  width: number,
  height: number,
  matrix: number[][],
  nWaypoints: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const rows = matrix.length;
  const cols = matrix[0]?.length ?? 0;
  if (rows === 0 || cols === 0) return;
  const cw = width / cols;
  const ch = height / rows;

  for (let i = 0; i < rows; i++) {
    // row-normalized scale: attention rows sum to 1, peak sets the range
    const peak = Math.max(...matrix[i], 1e-12);
    for (let j = 0; j < cols; j++) {
      const t = matrix[i][j] / peak;
      const shade = Math.round(255 * (1 - t));
      ctx.fillStyle = `rgb(${shade}, ${shade}, 255)`;
      ctx.fillRect(j * cw, i * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }

  // dashed boundary between the waypoint block and the object/feature block
  if (nWaypoints > 0 && nWaypoints < cols) {
    ctx.strokeStyle = "#222222";
    ctx.lineWidth = 1;
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(nWaypoints * cw, 0);
    ctx.lineTo(nWaypoints * cw, height);
    ctx.stroke();
    if (nWaypoints < rows) {
      ctx.beginPath();
      ctx.moveTo(0, nWaypoints * ch);
      ctx.lineTo(width, nWaypoints * ch);
      ctx.stroke();
    }
    ctx.setLineDash([]);
  }
}

export class HeatmapPanel {
  selection: HeatmapSelection = { kind: "decoder_cross", layer: 0 };
  private attention: AttentionDto | null = null;
  private nWaypoints = 0;
  private buttons: HTMLElement;
  private canvas: HTMLCanvasElement;

  constructor(private root: HTMLElement) {
    this.buttons = document.createElement("div");
    this.buttons.className = "heatmap-buttons";
    this.canvas = document.createElement("canvas");
    this.canvas.width = 240;
    this.canvas.height = 200;
    root.appendChild(this.buttons);
    root.appendChild(this.canvas);
    root.hidden = true;
  }

  setAttention(attention: AttentionDto | null, nWaypoints: number): void {
    this.attention = attention;
    this.nWaypoints = nWaypoints;
    this.root.hidden = attention === null;
    this.renderButtons();
    this.draw();
  }

  select(kind: MapKind, layer: number): void {
    this.selection = { kind, layer };
    this.renderButtons();
    this.draw();
  }

  private renderButtons(): void {
    this.buttons.textContent = "";
    if (!this.attention) return;
    const add = (label: string, kind: MapKind, layer: number) => {
      const b = document.createElement("button");
      b.textContent = label;
      b.dataset.kind = kind;
      b.dataset.layer = String(layer);
      if (this.selection.kind === kind && this.selection.layer === layer) {
        b.classList.add("active");
      }
      b.addEventListener("click", () => this.select(kind, layer));
      this.buttons.appendChild(b);
    };
    add("enc", "encoder", 0);
    this.attention.decoder_self.forEach((_, i) => add(`self ${i + 1}`, "decoder_self", i));
    this.attention.decoder_cross.forEach((_, i) => add(`cross ${i + 1}`, "decoder_cross", i));
  }

  matrix(): number[][] | null {
    if (!this.attention) return null;
    const group = this.attention[this.selection.kind];
    return group[this.selection.layer] ?? null;
  }

  draw(): void {
    const m = this.matrix();
    const ctx = this.canvas.getContext("2d") as Ctx2D | null;
    if (!m || !ctx) return;
    const boundary = this.selection.kind === "decoder_self" ? 0 : this.nWaypoints;
    drawHeatmap(ctx, this.canvas.width, this.canvas.height, m, boundary);
  }
}
