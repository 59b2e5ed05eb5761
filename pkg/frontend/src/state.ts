/** View state and its transitions, kept free of DOM so tests can drive it. */

import type {
  AttentionDto,
  ReshapeResponse,
  SceneDto,
  SessionState,
  TrajectoryDto,
  Waypoint,
} from "./api";

export const COLOR_BASELINE = "#d62728"; // accepted trajectory: red
export const COLOR_PREVIEW = "#1f77b4"; // pending modification: blue

export interface Polyline {
  points: Waypoint[];
  color: string;
  dashed: boolean;
}

export interface ViewState {
  sessionId: string | null;
  scene: SceneDto;
  /** Accepted trajectory (red). */
  baseline: TrajectoryDto | null;
  /** Raw model/oracle output of the pending command (blue). */
  preview: TrajectoryDto | null;
  /** Region-projected preview (blue, dashed). */
  clipped: TrajectoryDto | null;
  pendingText: string | null;
  similarity: number[];
  attention: AttentionDto | null;
  history: { text: string; lf: number }[];
  historyDepth: number;
  lfEnabled: boolean;
  lf: number;
}

export function emptyState(): ViewState {
  return {
    sessionId: null,
    scene: { objects: [] },
    baseline: null,
    preview: null,
    clipped: null,
    pendingText: null,
    similarity: [],
    attention: null,
    history: [],
    historyDepth: 0,
    lfEnabled: false,
    lf: 1.0,
  };
}

export function applySession(state: ViewState, s: SessionState): ViewState {
  return {
    ...state,
    sessionId: s.id,
    scene: s.scene,
    baseline: s.current,
    preview: null,
    clipped: null,
    pendingText: null,
    similarity: [],
    attention: null,
    history: s.history,
    historyDepth: s.history_depth,
  };
}

export function applyPreview(
  state: ViewState,
  resp: ReshapeResponse,
): ViewState {
  return {
    ...state,
    preview: resp.modified,
    clipped: resp.clipped,
    pendingText: resp.text,
    similarity: resp.similarity,
    attention: resp.attention,
  };
}

/** Polylines for the 3D view; the preview never replaces the baseline. */
export function polylines(state: ViewState): Polyline[] {
  const lines: Polyline[] = [];
  if (state.baseline) {
    lines.push({
      points: state.baseline.waypoints,
      color: COLOR_BASELINE,
      dashed: false,
    });
  }
  if (state.preview) {
    lines.push({
      points: state.preview.waypoints,
      color: COLOR_PREVIEW,
      dashed: false,
    });
  }
  if (state.clipped && !sameWaypoints(state.clipped, state.preview)) {
    lines.push({
      points: state.clipped.waypoints,
      color: COLOR_PREVIEW,
      dashed: true,
    });
  }
  return lines;
}

export interface SpeedSeries {
  values: number[];
  color: string;
}

export function speedSeries(state: ViewState): SpeedSeries[] {
  const series: SpeedSeries[] = [];
  if (state.baseline) {
    series.push({
      values: state.baseline.waypoints.map((w) => w[3]),
      color: COLOR_BASELINE,
    });
  }
  if (state.clipped) {
    series.push({
      values: state.clipped.waypoints.map((w) => w[3]),
      color: COLOR_PREVIEW,
    });
  }
  return series;
}

export function sameWaypoints(
  a: TrajectoryDto | null,
  b: TrajectoryDto | null,
): boolean {
  if (!a || !b) return a === b;
  if (a.waypoints.length !== b.waypoints.length) return false;
  return a.waypoints.every((w, i) =>
    w.every((x, j) => x === b.waypoints[i][j]),
  );
}
