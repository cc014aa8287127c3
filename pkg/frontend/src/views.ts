// Screen renderers. The server phase decides which screen is shown; the UI
// holds no state beyond the session id and the local label queue.

import { barChart, fmt, numberSpan, renderHeatmap, sparkline, type HeatLayer } from "./charts";
import type {
  AttributionRecord,
  CandidatesPayload,
  HeatmapPayload,
  SessionState,
} from "./types";

const TARGETS: AttributionRecord["target"][] = [
  "acquisition",
  "surrogate_mean",
  "surrogate_uncertainty",
];
const TARGET_LABELS: Record<string, string> = {
  acquisition: "acquisition",
  surrogate_mean: "predicted mean",
  surrogate_uncertainty: "uncertainty",
};

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function coordList(x: number[]): HTMLElement {
  const wrap = el("div", "coords");
  x.forEach((v, i) => {
    const item = el("span", "coord");
    item.append(`x${i + 1} = `);
    item.appendChild(numberSpan(v));
    wrap.appendChild(item);
  });
  return wrap;
}

export function renderHeader(root: HTMLElement, state: SessionState): void {
  const header = el("div", "header");
  header.appendChild(el("span", "session-id", `session ${state.id}`));
  const step = el("span", "step-counter");
  step.id = "step-counter";
  step.textContent = `step ${state.t} of ${state.budget}`;
  header.appendChild(step);
  header.appendChild(el("span", "phase-badge", state.phase));
  if (state.regret && state.regret.length) {
    const spark = el("span", "regret-spark");
    spark.appendChild(sparkline(state.regret));
    const last = state.regret[state.regret.length - 1];
    const label = el("span", "regret-label");
    label.append("regret ");
    label.appendChild(numberSpan(last));
    spark.appendChild(label);
    header.appendChild(spark);
  }
  root.appendChild(header);
}

export function renderElicitation(
  root: HTMLElement,
  state: SessionState,
  queueSize: number,
  onLabel: (label: number) => void,
): void {
  const screen = el("div", "screen elicit-screen");
  const prefs = state.preferences;
  const done = prefs.labeled + queueSize;
  screen.appendChild(
    el("h2", undefined, `Which point looks more promising? (${Math.min(done + 1, prefs.total)} of ${prefs.total})`),
  );
  const progress = el("div", "progress");
  progress.id = "elicit-progress";
  progress.dataset.labeled = String(prefs.labeled);
  progress.dataset.total = String(prefs.total);
  progress.textContent = `${prefs.labeled} labeled, ${queueSize} queued`;
  screen.appendChild(progress);
  if (prefs.hypothesis) {
    const hyp = el("div", "hypothesis", "expert hypothesis box: ");
    prefs.hypothesis.forEach((box) => {
      hyp.append(
        box.lower.map((lo, i) => `x${i + 1} ∈ [${fmt(lo)}, ${fmt(box.upper[i])}]`).join(", "),
      );
    });
    screen.appendChild(hyp);
  }
  const pair = prefs.pending_pair;
  if (pair) {
    const row = el("div", "pair-row");
    const left = el("div", "pair-card");
    left.appendChild(el("h3", undefined, "Left"));
    left.appendChild(coordList(pair.x1));
    const leftBtn = el("button", "prefer-btn", "Prefer left") as HTMLButtonElement;
    leftBtn.id = "prefer-left";
    leftBtn.onclick = () => onLabel(1);
    left.appendChild(leftBtn);
    const right = el("div", "pair-card");
    right.appendChild(el("h3", undefined, "Right"));
    right.appendChild(coordList(pair.x2));
    const rightBtn = el("button", "prefer-btn", "Prefer right") as HTMLButtonElement;
    rightBtn.id = "prefer-right";
    rightBtn.onclick = () => onLabel(0);
    right.appendChild(rightBtn);
    row.appendChild(left);
    row.appendChild(right);
    screen.appendChild(row);
  } else {
    screen.appendChild(el("p", "waiting", "all pairs labeled — fitting the preference model…"));
  }
  root.appendChild(screen);
}

function attributionPanels(records: AttributionRecord[], candidate: number): HTMLElement {
  const wrap = el("div", "attribution-grid");
  for (const method of ["shap", "lime"] as const) {
    for (const target of TARGETS) {
      const rec = records.find(
        (r) => r.candidate === candidate && r.method === method && r.target === target,
      );
      if (!rec) continue;
      const cell = el("div", "attribution-cell");
      cell.dataset.method = method;
      cell.dataset.target = target;
      cell.appendChild(barChart(rec.values, `${method} · ${TARGET_LABELS[target]}`));
      const base = el("div", "baseline");
      base.append(method === "shap" ? "background mean " : "intercept ");
      base.appendChild(numberSpan(rec.baseline, "num baseline-value"));
      cell.appendChild(base);
      wrap.appendChild(cell);
    }
  }
  return wrap;
}

export function renderDecision(
  root: HTMLElement,
  state: SessionState,
  payload: CandidatesPayload,
  onChoose: (side: "first" | "second") => void,
): void {
  const screen = el("div", "screen decide-screen");
  screen.appendChild(el("h2", undefined, `Step ${payload.step + 1}: accept a candidate`));
  const row = el("div", "pair-row");
  const cards: [string, "first" | "second", number[], Record<string, number | undefined>][] = [
    ["X1 (surrogate-only)", "first", payload.pair.x1, {
      score: payload.pair.score1,
      mean: payload.pair.snapshot1.mu_s,
      uncertainty: Math.sqrt(payload.pair.snapshot1.var_s),
    }],
    ["X2 (expert-informed)", "second", payload.pair.x2, {
      score: payload.pair.score2,
      mean: payload.pair.snapshot2.mu_s,
      uncertainty: Math.sqrt(payload.pair.snapshot2.var_s),
    }],
  ];
  const buttons: HTMLButtonElement[] = [];
  cards.forEach(([title, side, coords, numbers], ci) => {
    const card = el("div", "pair-card candidate-card");
    card.dataset.candidate = String(ci);
    card.appendChild(el("h3", undefined, title));
    card.appendChild(coordList(coords));
    const stats = el("dl", "stats");
    const statEntries: [string, number | undefined, string][] = [
      ["acquisition score", numbers.score, "score"],
      ["predicted mean", numbers.mean, "mean"],
      ["uncertainty (std)", numbers.uncertainty, "uncertainty"],
    ];
    for (const [label, value, key] of statEntries) {
      if (value === undefined) continue;
      stats.appendChild(el("dt", undefined, label));
      const dd = el("dd");
      const span = numberSpan(value);
      span.classList.add(`stat-${key}`);
      dd.appendChild(span);
      stats.appendChild(dd);
    }
    card.appendChild(stats);
    if (payload.explanations) {
      card.appendChild(attributionPanels(payload.explanations.attributions, ci));
    }
    const btn = el("button", "accept-btn", `Accept ${side === "first" ? "X1" : "X2"}`) as HTMLButtonElement;
    btn.id = side === "first" ? "accept-first" : "accept-second";
    btn.onclick = () => {
      buttons.forEach((b) => (b.disabled = true));
      onChoose(side);
    };
    buttons.push(btn);
    card.appendChild(btn);
    row.appendChild(card);
  });
  screen.appendChild(row);
  root.appendChild(screen);
}

export function renderWaiting(root: HTMLElement, state: SessionState): void {
  const screen = el("div", "screen waiting-screen");
  screen.appendChild(el("h2", undefined, "evaluating…"));
  screen.appendChild(
    el("p", "waiting", "the optimizer is proposing the next candidate pair"),
  );
  root.appendChild(screen);
}

export function renderDone(root: HTMLElement, state: SessionState): void {
  const screen = el("div", "screen done-screen");
  screen.appendChild(el("h2", undefined, state.phase === "done" ? "run complete" : "run aborted"));
  if (state.error) screen.appendChild(el("p", "error-banner", state.error));
  if (state.regret) {
    const best = Math.min(...state.regret);
    const p = el("p");
    p.append("final regret ");
    p.appendChild(numberSpan(state.regret[state.regret.length - 1]));
    p.append(` · best ${fmt(best)}`);
    screen.appendChild(p);
  }
  const hist = el("ol", "history");
  for (const h of state.history) {
    const li = el("li");
    li.append(`step ${h.step + 1}: chose ${h.side}, y = `);
    li.appendChild(numberSpan(h.y));
    hist.appendChild(li);
  }
  screen.appendChild(hist);
  root.appendChild(screen);
}

export interface HeatmapControlsState {
  d1: number;
  d2: number;
  res: number;
  layer: HeatLayer;
  payload: HeatmapPayload | null;
}

export function renderHeatmapPanel(
  root: HTMLElement,
  state: SessionState,
  hm: HeatmapControlsState,
  onDimsChange: (d1: number, d2: number, res: number) => void,
  onLayerChange: (layer: HeatLayer) => void,
): void {
  const panel = el("div", "heatmap-panel");
  panel.appendChild(el("h3", undefined, "slice view"));
  const controls = el("div", "heatmap-controls");
  const mkSelect = (id: string, chosen: number) => {
    const sel = document.createElement("select");
    sel.id = id;
    for (let d = 0; d < state.dims; d++) {
      const opt = document.createElement("option");
      opt.value = String(d);
      opt.textContent = `x${d + 1}`;
      if (d === chosen) opt.selected = true;
      sel.appendChild(opt);
    }
    return sel;
  };
  const selI = mkSelect("heatmap-d1", hm.d1);
  const selJ = mkSelect("heatmap-d2", hm.d2);
  const apply = () => {
    const d1 = Number(selI.value);
    const d2 = Number(selJ.value);
    if (d1 !== d2) onDimsChange(d1, d2, hm.res);
  };
  selI.onchange = apply;
  selJ.onchange = apply;
  controls.append("dims: ", selI, selJ);
  const layers: HeatLayer[] = ["mean", "uncertainty", "acquisition"];
  for (const layer of layers) {
    const btn = el("button", "layer-btn" + (hm.layer === layer ? " active" : ""), layer) as HTMLButtonElement;
    btn.dataset.layer = layer;
    btn.onclick = () => onLayerChange(layer);
    controls.appendChild(btn);
  }
  panel.appendChild(controls);
  const canvas = document.createElement("canvas");
  canvas.id = "heatmap-canvas";
  canvas.width = 260;
  canvas.height = 260;
  panel.appendChild(canvas);
  if (hm.payload) {
    renderHeatmap(
      canvas,
      hm.payload[hm.layer],
      hm.payload.axis_i,
      hm.payload.axis_j,
      hm.payload.annotations,
    );
    canvas.dataset.layer = hm.layer;
    canvas.dataset.markers = String(hm.payload.annotations.length);
  }
  root.appendChild(panel);
}
