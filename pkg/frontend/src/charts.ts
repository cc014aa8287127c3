// Chart rendering. Every number shown in the UI is server-computed; these
// helpers only scale values into pixels. Elements showing a number carry the
// exact payload value in data-value, with a shortened form as visible text.

const SVG_NS = "http://www.w3.org/2000/svg";

export function fmt(v: number): string {
  if (!isFinite(v)) return String(v);
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) return v.toExponential(3);
  return v.toPrecision(4);
}

export function numberSpan(v: number, cls = "num"): HTMLSpanElement {
  const span = document.createElement("span");
  span.className = cls;
  span.dataset.value = String(v);
  span.textContent = fmt(v);
  return span;
}

/** Horizontal bar chart for one attribution record (one bar per feature). */
export function barChart(values: number[], title: string): SVGSVGElement {
  const barH = 14;
  const gap = 4;
  const width = 180;
  const height = values.length * (barH + gap) + 18;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "bar-chart");
  const label = document.createElementNS(SVG_NS, "text");
  label.setAttribute("x", "0");
  label.setAttribute("y", "12");
  label.setAttribute("class", "chart-title");
  label.textContent = title;
  svg.appendChild(label);
  const maxAbs = Math.max(...values.map((v) => Math.abs(v)), 1e-12);
  const mid = width / 2;
  values.forEach((v, i) => {
    const y = 18 + i * (barH + gap);
    const w = (Math.abs(v) / maxAbs) * (width / 2 - 24);
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(v >= 0 ? mid : mid - w));
    rect.setAttribute("y", String(y));
    rect.setAttribute("width", String(Math.max(w, 0.5)));
    rect.setAttribute("height", String(barH));
    rect.setAttribute("class", v >= 0 ? "bar pos" : "bar neg");
    rect.dataset.value = String(v);
    rect.dataset.feature = String(i);
    svg.appendChild(rect);
    const txt = document.createElementNS(SVG_NS, "text");
    txt.setAttribute("x", "2");
    txt.setAttribute("y", String(y + barH - 3));
    txt.setAttribute("class", "bar-label");
    txt.textContent = `x${i + 1}`;
    svg.appendChild(txt);
  });
  const axis = document.createElementNS(SVG_NS, "line");
  axis.setAttribute("x1", String(mid));
  axis.setAttribute("x2", String(mid));
  axis.setAttribute("y1", "16");
  axis.setAttribute("y2", String(height));
  axis.setAttribute("class", "axis");
  svg.appendChild(axis);
  return svg;
}

/** Regret sparkline; one polyline point per completed evaluation. */
export function sparkline(values: number[], width = 220, height = 48): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "sparkline");
  if (values.length === 0) return svg;
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const pts = values
    .map((v, i) => {
      const x = values.length === 1 ? width / 2 : (i / (values.length - 1)) * (width - 8) + 4;
      const y = height - 6 - ((v - lo) / span) * (height - 12);
      return `${x},${y}`;
    })
    .join(" ");
  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute("points", pts);
  line.setAttribute("class", "spark-line");
  line.dataset.count = String(values.length);
  svg.appendChild(line);
  return svg;
}

export type HeatLayer = "mean" | "uncertainty" | "acquisition";

/** Render one grid layer onto a canvas with numbered sample markers. */
export function renderHeatmap(
  canvas: HTMLCanvasElement,
  grid: number[][],
  axisI: number[],
  axisJ: number[],
  annotations: { index: number; i: number; j: number }[],
): void {
  const n = grid.length;
  const m = grid[0].length;
  const w = canvas.width;
  const h = canvas.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of grid)
    for (const v of row) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  const span = hi - lo || 1;
  const cw = w / n;
  const ch = h / m;
  for (let a = 0; a < n; a++) {
    for (let b = 0; b < m; b++) {
      const u = (grid[a][b] - lo) / span;
      // viridis-ish two-stop ramp
      const r = Math.round(40 + 215 * u);
      const g = Math.round(40 + 160 * u);
      const bB = Math.round(110 - 60 * u + 80 * (1 - u));
      ctx.fillStyle = `rgb(${r},${g},${bB})`;
      // j grows upward: draw row b at the bottom
      ctx.fillRect(a * cw, h - (b + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
  const iLo = axisI[0];
  const iHi = axisI[axisI.length - 1];
  const jLo = axisJ[0];
  const jHi = axisJ[axisJ.length - 1];
  ctx.font = "11px sans-serif";
  for (const a of annotations) {
    const px = ((a.i - iLo) / (iHi - iLo || 1)) * (w - 2) + 1;
    const py = h - (((a.j - jLo) / (jHi - jLo || 1)) * (h - 2) + 1);
    ctx.fillStyle = "#fff";
    ctx.beginPath();
    ctx.arc(px, py, 8, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#111";
    ctx.fillText(String(a.index), px - 3, py + 4);
  }
}
