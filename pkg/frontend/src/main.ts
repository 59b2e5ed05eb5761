/** Application shell: builds the console DOM and drives the session loop. */

import { Api, ApiError, HttpApi, SceneDto } from "./api";
import { renderBars } from "./bars";
import { HeatmapPanel } from "./heatmap";
import { SceneView } from "./scene3d";
import { SpeedChart } from "./speedchart";
import {
  applyPreview,
  applySession,
  emptyState,
  polylines,
  speedSeries,
  ViewState,
} from "./state";
import { showToast } from "./toast";

const DEMO_SCENE: SceneDto = {
  objects: [
    { name: "backpack", position: [0.45, 0.3, 0.0] },
    { name: "ambulance", position: [-0.5, 0.15, 0.25] },
    { name: "acoustic guitar", position: [0.1, -0.45, -0.2] },
  ],
};

interface QueuedCommand {
  text: string;
  lf: number | null;
}

export class App {
  state: ViewState = emptyState();
  private sceneView: SceneView;
  private speedChart: SpeedChart;
  private heatmap: HeatmapPanel;
  private busy = false;
  private queue: QueuedCommand[] = [];

  readonly input: HTMLInputElement;
  readonly submitBtn: HTMLButtonElement;
  readonly acceptBtn: HTMLButtonElement;
  readonly undoBtn: HTMLButtonElement;
  readonly lfRow: HTMLElement;
  readonly lfSlider: HTMLInputElement;
  readonly attnToggle: HTMLInputElement;
  readonly toasts: HTMLElement;
  readonly historyList: HTMLElement;
  readonly bars: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: Api,
  ) {
    root.innerHTML = `
      <div class="layout">
        <div class="left">
          <canvas id="scene-canvas" width="560" height="420"></canvas>
          <canvas id="speed-canvas" width="560" height="140"></canvas>
        </div>
        <div class="right">
          <form id="command-form">
            <input id="command-input" type="text"
                   placeholder="e.g. get a bit closer to the backpack" />
            <button id="submit-btn" type="submit">preview</button>
          </form>
          <div id="lf-row">
            <label>locality
              <input id="lf-slider" type="range" min="0" max="1"
                     step="0.05" value="1" />
              <span id="lf-value">1.00</span>
            </label>
          </div>
          <label id="attn-row">
            <input id="attn-toggle" type="checkbox" /> attention maps
          </label>
          <div class="actions">
            <button id="accept-btn" disabled>accept</button>
            <button id="undo-btn" disabled>undo</button>
          </div>
          <div id="bars"></div>
          <div id="heatmap"></div>
          <ol id="history"></ol>
        </div>
      </div>
      <div id="toasts"></div>`;

    this.sceneView = new SceneView(this.el<HTMLCanvasElement>("#scene-canvas"));
    this.speedChart = new SpeedChart(this.el<HTMLCanvasElement>("#speed-canvas"));
    this.heatmap = new HeatmapPanel(this.el("#heatmap"));
    this.input = this.el("#command-input");
    this.submitBtn = this.el("#submit-btn");
    this.acceptBtn = this.el("#accept-btn");
    this.undoBtn = this.el("#undo-btn");
    this.lfRow = this.el("#lf-row");
    this.lfSlider = this.el("#lf-slider");
    this.attnToggle = this.el("#attn-toggle");
    this.toasts = this.el("#toasts");
    this.historyList = this.el("#history");
    this.bars = this.el("#bars");

    this.el<HTMLFormElement>("#command-form").addEventListener(
      "submit",
      (e) => {
        e.preventDefault();
        void this.submitCommand(this.input.value);
      },
    );
    this.acceptBtn.addEventListener("click", () => void this.accept());
    this.undoBtn.addEventListener("click", () => void this.undo());
    this.lfSlider.addEventListener("input", () => {
      this.state.lf = Number(this.lfSlider.value);
      this.el("#lf-value").textContent = this.state.lf.toFixed(2);
    });
  }

  private el<T extends HTMLElement = HTMLElement>(sel: string): T {
    const found = this.root.querySelector(sel);
    if (!found) throw new Error(`missing element ${sel}`);
    return found as T;
  }

  async boot(scene: SceneDto = DEMO_SCENE, seed = 0): Promise<void> {
    const health = await this.api.healthz();
    this.state.lfEnabled = health.lf_enabled;
    this.lfRow.hidden = !health.lf_enabled;
    const session = await this.api.createSession({ scene, seed });
    this.state = applySession(this.state, session);
    this.render();
  }

  /** Queue-aware preview; only one reshape is in flight at a time. */
  async submitCommand(text: string, lf?: number | null): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed) {
      this.input.classList.add("invalid");
      return; // client-side validation: no request for empty commands
    }
    this.input.classList.remove("invalid");
    const useLf =
      lf !== undefined ? lf : this.state.lfEnabled ? this.state.lf : null;
    if (this.busy) {
      this.queue.push({ text: trimmed, lf: useLf });
      return;
    }
    this.busy = true;
    try {
      const resp = await this.api.reshape(
        this.state.sessionId!,
        trimmed,
        useLf,
        this.attnToggle.checked,
      );
      this.state = applyPreview(this.state, resp);
      this.render();
    } catch (err) {
      this.toastError(err);
    } finally {
      this.busy = false;
      const next = this.queue.shift();
      if (next) void this.submitCommand(next.text, next.lf);
    }
  }

  async accept(): Promise<void> {
    try {
      const session = await this.api.accept(this.state.sessionId!);
      this.state = applySession(this.state, session);
      this.render();
    } catch (err) {
      this.toastError(err);
    }
  }

  async undo(): Promise<void> {
    try {
      const session = await this.api.undo(this.state.sessionId!);
      this.state = applySession(this.state, session);
      this.render();
    } catch (err) {
      this.toastError(err);
    }
  }

  /** Re-sync from the server; any shown state is reconstructible. */
  async refresh(): Promise<void> {
    const session = await this.api.getSession(this.state.sessionId!);
    this.state = applySession(this.state, session);
    this.render();
  }

  private toastError(err: unknown): void {
    const msg =
      err instanceof ApiError
        ? `${err.code}: ${err.message}`
        : `network error: ${String(err)}`;
    showToast(this.toasts, msg, "error");
  }

  render(): void {
    this.sceneView.setContent({
      objects: this.state.scene.objects,
      polylines: polylines(this.state),
      highlight: this.state.similarity,
    });
    this.speedChart.setSeries(speedSeries(this.state));
    renderBars(
      this.bars,
      this.state.scene.objects.map((o) => o.name),
      this.state.similarity,
    );
    this.heatmap.setAttention(
      this.state.attention,
      this.state.baseline?.waypoints.length ?? 0,
    );
    this.acceptBtn.disabled = this.state.preview === null;
    this.undoBtn.disabled = this.state.historyDepth === 0;
    this.historyList.textContent = "";
    for (const entry of this.state.history) {
      const li = document.createElement("li");
      li.textContent = entry.text;
      this.historyList.appendChild(li);
    }
  }
}

export async function initApp(root: HTMLElement, api: Api): Promise<App> {
  const app = new App(root, api);
  await app.boot();
  return app;
}

const mount = typeof document !== "undefined" && document.getElementById("app");
if (mount) {
  void initApp(mount, new HttpApi("")).catch((err) => {
    mount.textContent = `failed to start: ${String(err)}`;
  });
}
