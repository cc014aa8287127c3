// Session controller: polls the server state machine and renders the screen
// for the current phase. Reload-safe: everything lives on the server except
// the session id (kept in the URL hash) and the unsent label queue.

import { SessionApi } from "./api";
import type { HeatLayer } from "./charts";
import { LabelQueue } from "./queue";
import type { CandidatesPayload, SessionState } from "./types";
import {
  renderDecision,
  renderDone,
  renderElicitation,
  renderHeader,
  renderHeatmapPanel,
  renderWaiting,
  type HeatmapControlsState,
} from "./views";

export class App {
  state: SessionState | null = null;
  candidates: CandidatesPayload | null = null;
  queue: LabelQueue;
  heat: HeatmapControlsState = { d1: 0, d2: 1, res: 24, layer: "mean", payload: null };
  networkError: string | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  heatmapFetches = 0;

  constructor(
    public root: HTMLElement,
    public api: SessionApi,
    public sessionId: string,
    private pollMs = 500,
  ) {
    this.queue = new LabelQueue(
      api,
      sessionId,
      (s) => this.onState(s),
      (msg) => {
        this.networkError = msg;
        this.render();
      },
    );
  }

  async start(): Promise<void> {
    const state = await this.api.state(this.sessionId);
    this.onState(state);
    this.schedule();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer) clearTimeout(this.timer);
  }

  private schedule(): void {
    if (this.stopped) return;
    this.timer = setTimeout(() => void this.poll(), this.pollMs);
  }

  async poll(): Promise<void> {
    try {
      const state = await this.api.state(this.sessionId);
      this.networkError = null;
      this.onState(state);
    } catch (err) {
      this.networkError = err instanceof Error ? err.message : String(err);
      this.render();
    } finally {
      this.schedule();
    }
  }

  async onState(state: SessionState): Promise<void> {
    const phaseChanged = this.state?.phase !== state.phase || this.state?.t !== state.t;
    this.state = state;
    if (state.phase === "awaiting_choice" && (phaseChanged || !this.candidates)) {
      try {
        this.candidates = await this.api.candidates(this.sessionId);
      } catch {
        this.candidates = null;
      }
    }
    if (state.phase !== "awaiting_choice") this.candidates = null;
    if (phaseChanged && this.heat.payload === null && state.phase !== "eliciting_preferences") {
      const [d1, d2] = state.suggested_dims;
      this.heat.d1 = d1;
      this.heat.d2 = d2;
      void this.fetchHeatmap();
    }
    this.render();
  }

  label(value: number): void {
    this.queue.push(value);
    this.render();
  }

  async choose(side: "first" | "second"): Promise<void> {
    try {
      const state = await this.api.choose(this.sessionId, side);
      this.heat.payload = null; // context changed; refresh on demand
      this.onState(state);
    } catch (err) {
      this.networkError = err instanceof Error ? err.message : String(err);
      this.render();
    }
  }

  async fetchHeatmap(): Promise<void> {
    this.heatmapFetches += 1;
    try {
      this.heat.payload = await this.api.heatmap(
        this.sessionId,
        this.heat.d1,
        this.heat.d2,
        this.heat.res,
      );
    } catch {
      this.heat.payload = null;
    }
    this.render();
  }

  setHeatmapDims(d1: number, d2: number, res: number): void {
    this.heat.d1 = d1;
    this.heat.d2 = d2;
    this.heat.res = res;
    void this.fetchHeatmap(); // exactly one request per dims change
  }

  setHeatmapLayer(layer: HeatLayer): void {
    this.heat.layer = layer; // all layers arrive in one payload: no refetch
    this.render();
  }

  render(): void {
    if (!this.state) return;
    const root = this.root;
    root.textContent = "";
    renderHeader(root, this.state);
    if (this.networkError) {
      const banner = document.createElement("div");
      banner.className = "retry-banner";
      banner.id = "retry-banner";
      banner.textContent = `connection trouble — retrying (${this.networkError})`;
      root.appendChild(banner);
    }
    switch (this.state.phase) {
      case "eliciting_preferences":
        renderElicitation(root, this.state, this.queue.size, (v) => this.label(v));
        break;
      case "awaiting_choice":
        if (this.candidates) {
          renderDecision(root, this.state, this.candidates, (side) => void this.choose(side));
        } else {
          renderWaiting(root, this.state);
        }
        break;
      case "evaluating":
        renderWaiting(root, this.state);
        break;
      default:
        renderDone(root, this.state);
    }
    if (this.state.phase !== "eliciting_preferences") {
      renderHeatmapPanel(
        root,
        this.state,
        this.heat,
        (d1, d2, res) => this.setHeatmapDims(d1, d2, res),
        (layer) => this.setHeatmapLayer(layer),
      );
    }
  }
}
