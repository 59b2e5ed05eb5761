import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { AttentionDto } from "../src/api";
import { renderBars } from "../src/bars";
import { HeatmapPanel, drawHeatmap } from "../src/heatmap";
import { drawScene, type Ctx2D } from "../src/scene3d";
import { drawSpeedChart } from "../src/speedchart";
import { COLOR_BASELINE, COLOR_PREVIEW } from "../src/state";
import { showToast } from "../src/toast";

interface Recorder {
  ctx: Ctx2D;
  strokes: { style: string; dash: number[] }[];
  fills: { style: string; x: number; y: number }[];
  texts: string[];
}

function recorder(): Recorder {
  const strokes: Recorder["strokes"] = [];
  const fills: Recorder["fills"] = [];
  const texts: string[] = [];
  let dash: number[] = [];
  const ctx = {
    strokeStyle: "" as string,
    fillStyle: "" as string,
    lineWidth: 0,
    font: "",
    globalAlpha: 1,
    clearRect() {},
    fillRect(x: number, y: number) {
      fills.push({ style: String(ctx.fillStyle), x, y });
    },
    beginPath() {},
    moveTo() {},
    lineTo() {},
    arc() {},
    fill() {},
    fillText(text: string) {
      texts.push(text);
    },
    setLineDash(segments: number[]) {
      dash = segments;
    },
    stroke() {
      strokes.push({ style: String(ctx.strokeStyle), dash: [...dash] });
    },
  };
  return { ctx: ctx as unknown as Ctx2D, strokes, fills, texts };
}

describe("drawScene", () => {
  it("strokes the baseline solid red and the clipped line dashed blue", () => {
    const rec = recorder();
    drawScene(rec.ctx, 560, 420, { yaw: 0, pitch: 0.4, zoom: 120 }, {
      objects: [{ name: "backpack", position: [0.2, 0.1, 0] }],
      polylines: [
        { points: [[0, 0, 0, 0.5], [0.1, 0, 0, 0.5]], color: COLOR_BASELINE, dashed: false },
        { points: [[0, 0.1, 0, 0.5], [0.1, 0.1, 0, 0.5]], color: COLOR_PREVIEW, dashed: true },
      ],
      highlight: [0.8],
    });
    expect(
      rec.strokes.some((s) => s.style === COLOR_BASELINE && s.dash.length === 0),
    ).toBe(true);
    expect(
      rec.strokes.some((s) => s.style === COLOR_PREVIEW && s.dash.length === 2),
    ).toBe(true);
    expect(rec.texts).toContain("backpack");
  });
});

describe("drawSpeedChart", () => {
  it("strokes axes plus one path per series", () => {
    const rec = recorder();
    drawSpeedChart(rec.ctx, 560, 140, [
      { values: [0.5, 0.6, 0.7], color: COLOR_BASELINE },
      { values: [0.4, 0.4, 0.4], color: COLOR_PREVIEW },
    ]);
    const colors = rec.strokes.map((s) => s.style);
    expect(colors).toContain(COLOR_BASELINE);
    expect(colors).toContain(COLOR_PREVIEW);
    expect(rec.strokes).toHaveLength(3);
  });

  it("skips empty series", () => {
    const rec = recorder();
    drawSpeedChart(rec.ctx, 560, 140, [{ values: [], color: COLOR_BASELINE }]);
    expect(rec.strokes).toHaveLength(1);
  });
});

describe("drawHeatmap", () => {
  it("paints the row peak fully saturated and normalizes per row", () => {
    const rec = recorder();
    drawHeatmap(rec.ctx, 100, 100, [[0.2, 0.8], [0.9, 0.1]], 0);
    expect(rec.fills).toHaveLength(4);
    expect(rec.fills[1].style).toBe("rgb(0, 0, 255)");
    expect(rec.fills[2].style).toBe("rgb(0, 0, 255)");
    expect(rec.fills[0].style).not.toBe("rgb(0, 0, 255)");
  });

  it("draws a dashed block boundary when waypoints end mid-matrix", () => {
    const rec = recorder();
    drawHeatmap(rec.ctx, 90, 90, [
      [1, 0, 0],
      [0, 1, 0],
      [0, 0, 1],
    ], 2);
    expect(rec.strokes.some((s) => s.dash.length === 2)).toBe(true);
  });

  it("does nothing for an empty matrix", () => {
    const rec = recorder();
    drawHeatmap(rec.ctx, 90, 90, [], 0);
    expect(rec.fills).toHaveLength(0);
    expect(rec.strokes).toHaveLength(0);
  });
});

describe("renderBars", () => {
  it("renders one labelled row per object with clamped widths", () => {
    const root = document.createElement("div");
    renderBars(root, ["backpack", "ambulance"], [0.25, 1.7]);
    const rows = root.querySelectorAll(".bar-row");
    expect(rows).toHaveLength(2);
    const labels = [...root.querySelectorAll(".bar-label")].map(
      (el) => el.textContent,
    );
    expect(labels).toEqual(["backpack", "ambulance"]);
    const fills = [...root.querySelectorAll<HTMLElement>(".bar-fill")];
    expect(parseFloat(fills[0].style.width)).toBeCloseTo(25, 6);
    expect(parseFloat(fills[1].style.width)).toBeCloseTo(100, 6);
    expect(fills[1].dataset.value).toBe("1.7");
  });

  it("clears previous rows on re-render", () => {
    const root = document.createElement("div");
    renderBars(root, ["a", "b", "c"], [0, 0, 0]);
    renderBars(root, ["a"], [0.5]);
    expect(root.querySelectorAll(".bar-row")).toHaveLength(1);
  });
});

describe("showToast", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("appends a classed element and removes it after the ttl", () => {
    const box = document.createElement("div");
    const el = showToast(box, "parse_error: no such command", "error", 1000);
    expect(el.className).toBe("toast toast-error");
    expect(box.textContent).toContain("parse_error");
    vi.advanceTimersByTime(999);
    expect(box.contains(el)).toBe(true);
    vi.advanceTimersByTime(2);
    expect(box.contains(el)).toBe(false);
  });
});

describe("HeatmapPanel", () => {
  function attention(): AttentionDto {
    const m = (a: number, b: number) => [
      [a, b],
      [b, a],
    ];
    return {
      encoder: [m(0.9, 0.1)],
      decoder_self: [m(0.8, 0.2), m(0.75, 0.25)],
      decoder_cross: [m(0.6, 0.4), m(0.5, 0.5)],
    };
  }

  beforeEach(() => {
    vi.spyOn(HTMLCanvasElement.prototype, "getContext").mockReturnValue(
      recorder().ctx as unknown as CanvasRenderingContext2D,
    );
  });
  afterEach(() => {
    vi.restoreAllMocks();
  });

  it("stays hidden until attention arrives and lists one button per map", () => {
    const root = document.createElement("div");
    const panel = new HeatmapPanel(root);
    expect(root.hidden).toBe(true);
    panel.setAttention(attention(), 1);
    expect(root.hidden).toBe(false);
    const buttons = [...root.querySelectorAll("button")];
    expect(buttons.map((b) => b.textContent)).toEqual([
      "enc",
      "self 1",
      "self 2",
      "cross 1",
      "cross 2",
    ]);
  });

  it("defaults to the first cross map and follows selection", () => {
    const root = document.createElement("div");
    const panel = new HeatmapPanel(root);
    panel.setAttention(attention(), 1);
    expect(panel.selection).toEqual({ kind: "decoder_cross", layer: 0 });
    expect(panel.matrix()).toEqual([
      [0.6, 0.4],
      [0.4, 0.6],
    ]);
    const self2 = [...root.querySelectorAll("button")].find(
      (b) => b.textContent === "self 2",
    )!;
    self2.click();
    expect(panel.selection).toEqual({ kind: "decoder_self", layer: 1 });
    expect(panel.matrix()).toEqual([
      [0.75, 0.25],
      [0.25, 0.75],
    ]);
    const active = [...root.querySelectorAll("button.active")];
    expect(active).toHaveLength(1);
    expect(active[0].textContent).toBe("self 2");
  });

  it("hides again when attention is cleared", () => {
    const root = document.createElement("div");
    const panel = new HeatmapPanel(root);
    panel.setAttention(attention(), 1);
    panel.setAttention(null, 0);
    expect(root.hidden).toBe(true);
    expect(panel.matrix()).toBeNull();
  });
});
