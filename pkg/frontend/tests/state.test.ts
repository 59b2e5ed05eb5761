import { describe, expect, it } from "vitest";

import type { ReshapeResponse, SessionState, Waypoint } from "../src/api";
import {
  COLOR_BASELINE,
  COLOR_PREVIEW,
  applyPreview,
  applySession,
  emptyState,
  polylines,
  sameWaypoints,
  speedSeries,
} from "../src/state";
import { DEFAULT_CAMERA, project } from "../src/scene3d";

function wp(i: number, dy = 0, dv = 0): Waypoint {
  return [0.1 * i, 0.05 * i + dy, -0.02 * i, 0.5 + dv];
}

function traj(n: number, dy = 0, dv = 0) {
  return { waypoints: Array.from({ length: n }, (_, i) => wp(i, dy, dv)) };
}

function session(overrides: Partial<SessionState> = {}): SessionState {
  return {
    id: "s1",
    engine: "oracle",
    scene: { objects: [{ name: "backpack", position: [0.3, 0.2, 0] }] },
    current: traj(5),
    history: [],
    history_depth: 0,
    pending: null,
    ...overrides,
  };
}

function reshapeResponse(
  overrides: Partial<ReshapeResponse> = {},
): ReshapeResponse {
  return {
    text: "go up",
    lf: 1.0,
    original: traj(5),
    modified: traj(5, 0.3),
    clipped: traj(5, 0.3),
    similarity: [1, 0],
    attention: null,
    accepted: false,
    ...overrides,
  };
}

describe("emptyState", () => {
  it("starts with nothing to draw", () => {
    const s = emptyState();
    expect(s.sessionId).toBeNull();
    expect(s.baseline).toBeNull();
    expect(s.preview).toBeNull();
    expect(polylines(s)).toEqual([]);
    expect(speedSeries(s)).toEqual([]);
  });
});

describe("applySession", () => {
  it("installs the server trajectory as baseline and clears preview state", () => {
    let s = emptyState();
    s = applyPreview(s, reshapeResponse());
    s = applySession(s, session({ history_depth: 2 }));
    expect(s.sessionId).toBe("s1");
    expect(s.baseline).toEqual(traj(5));
    expect(s.preview).toBeNull();
    expect(s.clipped).toBeNull();
    expect(s.pendingText).toBeNull();
    expect(s.similarity).toEqual([]);
    expect(s.attention).toBeNull();
    expect(s.historyDepth).toBe(2);
  });

  it("copies history entries", () => {
    const s = applySession(
      emptyState(),
      session({ history: [{ text: "go up", lf: 1 }], history_depth: 1 }),
    );
    expect(s.history).toEqual([{ text: "go up", lf: 1 }]);
  });
});

describe("applyPreview", () => {
  it("records the pending command without touching the baseline", () => {
    let s = applySession(emptyState(), session());
    s = applyPreview(s, reshapeResponse({ similarity: [0.25] }));
    expect(s.baseline).toEqual(traj(5));
    expect(s.preview).toEqual(traj(5, 0.3));
    expect(s.pendingText).toBe("go up");
    expect(s.similarity).toEqual([0.25]);
  });
});

describe("polylines", () => {
  it("draws only the red baseline before any command", () => {
    const s = applySession(emptyState(), session());
    const lines = polylines(s);
    expect(lines).toHaveLength(1);
    expect(lines[0].color).toBe(COLOR_BASELINE);
    expect(lines[0].dashed).toBe(false);
  });

  it("adds a solid blue preview and skips an identical clipped copy", () => {
    let s = applySession(emptyState(), session());
    s = applyPreview(s, reshapeResponse());
    const lines = polylines(s);
    expect(lines).toHaveLength(2);
    expect(lines[1].color).toBe(COLOR_PREVIEW);
    expect(lines[1].dashed).toBe(false);
  });

  it("adds a dashed blue line when the region changed the preview", () => {
    let s = applySession(emptyState(), session());
    s = applyPreview(s, reshapeResponse({ clipped: traj(5, 0.1) }));
    const lines = polylines(s);
    expect(lines).toHaveLength(3);
    expect(lines[2].color).toBe(COLOR_PREVIEW);
    expect(lines[2].dashed).toBe(true);
    expect(lines[2].points).toEqual(traj(5, 0.1).waypoints);
  });
});

describe("speedSeries", () => {
  it("extracts the fourth column for baseline and clipped", () => {
    let s = applySession(emptyState(), session());
    s = applyPreview(s, reshapeResponse({ clipped: traj(5, 0, -0.2) }));
    const series = speedSeries(s);
    expect(series).toHaveLength(2);
    expect(series[0].color).toBe(COLOR_BASELINE);
    expect(series[0].values).toEqual(traj(5).waypoints.map((w) => w[3]));
    expect(series[1].color).toBe(COLOR_PREVIEW);
    expect(series[1].values[0]).toBeCloseTo(0.3, 12);
  });
});

describe("sameWaypoints", () => {
  it("treats two nulls as equal and null vs value as different", () => {
    expect(sameWaypoints(null, null)).toBe(true);
    expect(sameWaypoints(traj(3), null)).toBe(false);
    expect(sameWaypoints(null, traj(3))).toBe(false);
  });

  it("compares element by element", () => {
    expect(sameWaypoints(traj(4), traj(4))).toBe(true);
    expect(sameWaypoints(traj(4), traj(5))).toBe(false);
    const a = traj(4);
    const b = traj(4);
    b.waypoints[2][3] += 1e-9;
    expect(sameWaypoints(a, b)).toBe(false);
  });
});

describe("project", () => {
  it("maps the origin to the canvas center", () => {
    const [x, y] = project([0, 0, 0], DEFAULT_CAMERA, 560, 420);
    expect(x).toBeCloseTo(280, 9);
    expect(y).toBeCloseTo(210, 9);
  });

  it("moves +z up the screen and scales with zoom", () => {
    const cam = { yaw: 0, pitch: 0, zoom: 100 };
    const [, y] = project([0, 0, 0.5], cam, 560, 420);
    expect(y).toBeCloseTo(210 - 50, 9);
    const [x] = project([0, 0.5, 0], cam, 560, 420);
    expect(x).toBeCloseTo(280 + 50, 9);
  });

  it("hides depth along the view axis at pitch zero", () => {
    const cam = { yaw: 0, pitch: 0, zoom: 100 };
    const [x, y] = project([0.7, 0, 0], cam, 560, 420);
    expect(x).toBeCloseTo(280, 9);
    expect(y).toBeCloseTo(210, 9);
  });
});
