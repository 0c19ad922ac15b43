import type { TrendsPayload } from "./types";

// Chart geometry in px. Rendering is plain SVG strings so the math stays
// testable without a DOM.
const CELL_W = 34;
const CELL_H = 26;
const LABEL_GUTTER = 190;
const AREA_W = 560;
const AREA_H = 220;
const AXIS_PAD = 28;

const PALETTE = [
  "#2563eb",
  "#d97706",
  "#059669",
  "#dc2626",
  "#7c3aed",
  "#0891b2",
  "#ca8a04",
  "#be185d",
];

export interface HeatmapCell {
  topic: number;
  year: number;
  count: number;
  /** count / max(count) over the whole grid; 0 when the grid is empty. */
  intensity: number;
  row: number;
  col: number;
}

export interface StackBand {
  topic: number;
  label: string;
  /** Cumulative lower/upper bounds per year, in document counts. */
  lower: number[];
  upper: number[];
}

export interface StackedSeries {
  years: number[];
  bands: StackBand[];
  /** Column sums; the top band's upper edge equals this. */
  totals: number[];
}

export function hasTrendData(payload: TrendsPayload): boolean {
  return payload.years.length > 0 && payload.counts.some((row) => row.some((c) => c > 0));
}

export function topicLabel(payload: TrendsPayload, topic: number): string {
  return payload.labels[String(topic)] ?? String(topic);
}

/** Flatten the counts grid into cells with intensity proportional to count. */
export function heatmapCells(payload: TrendsPayload): HeatmapCell[] {
  let max = 0;
  for (const row of payload.counts) {
    for (const c of row) {
      if (c > max) max = c;
    }
  }
  const cells: HeatmapCell[] = [];
  payload.topics.forEach((topic, r) => {
    payload.years.forEach((year, c) => {
      const count = payload.counts[r]?.[c] ?? 0;
      cells.push({
        topic,
        year,
        count,
        intensity: max > 0 ? count / max : 0,
        row: r,
        col: c,
      });
    });
  });
  return cells;
}

/** Stack the per-topic rows bottom-up. Band order follows payload.topics. */
export function stackedSeries(payload: TrendsPayload): StackedSeries {
  const cols = payload.years.length;
  const running = new Array<number>(cols).fill(0);
  const bands: StackBand[] = payload.topics.map((topic, r) => {
    const lower = running.slice();
    for (let c = 0; c < cols; c++) {
      running[c] += payload.counts[r]?.[c] ?? 0;
    }
    return { topic, label: topicLabel(payload, topic), lower, upper: running.slice() };
  });
  return { years: payload.years, bands, totals: running.slice() };
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderHeatmap(payload: TrendsPayload): string {
  const cells = heatmapCells(payload);
  const width = LABEL_GUTTER + payload.years.length * CELL_W;
  const height = (payload.topics.length + 1) * CELL_H;
  const parts: string[] = [
    `<svg class="heatmap" viewBox="0 0 ${width} ${height}" role="img">`,
  ];
  payload.topics.forEach((topic, r) => {
    const y = r * CELL_H + CELL_H * 0.68;
    parts.push(
      `<text class="row-label" x="${LABEL_GUTTER - 8}" y="${y}" text-anchor="end">` +
        `${esc(topicLabel(payload, topic))}</text>`
    );
  });
  for (const cell of cells) {
    const x = LABEL_GUTTER + cell.col * CELL_W;
    const y = cell.row * CELL_H;
    parts.push(
      `<rect class="cell" x="${x}" y="${y}" width="${CELL_W - 2}" height="${CELL_H - 2}"` +
        ` fill="#2563eb" fill-opacity="${cell.intensity.toFixed(4)}"` +
        ` data-topic="${cell.topic}" data-year="${cell.year}" data-count="${cell.count}">` +
        `<title>${esc(topicLabel(payload, cell.topic))} ${cell.year}: ${cell.count}</title></rect>`
    );
  }
  payload.years.forEach((year, c) => {
    const x = LABEL_GUTTER + c * CELL_W + CELL_W / 2;
    parts.push(
      `<text class="col-label" x="${x}" y="${height - 6}" text-anchor="middle">${year}</text>`
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

function areaPath(
  band: StackBand,
  years: number[],
  yMax: number
): string {
  const n = years.length;
  const xAt = (c: number) =>
    n === 1 ? AXIS_PAD + (AREA_W - 2 * AXIS_PAD) / 2 : AXIS_PAD + (c * (AREA_W - 2 * AXIS_PAD)) / (n - 1);
  const yAt = (v: number) => AREA_H - AXIS_PAD - (v / yMax) * (AREA_H - 2 * AXIS_PAD);
  const top: string[] = [];
  const bottom: string[] = [];
  for (let c = 0; c < n; c++) {
    top.push(`${xAt(c).toFixed(2)},${yAt(band.upper[c]).toFixed(2)}`);
  }
  for (let c = n - 1; c >= 0; c--) {
    bottom.push(`${xAt(c).toFixed(2)},${yAt(band.lower[c]).toFixed(2)}`);
  }
  return `M${top.join(" L")} L${bottom.join(" L")} Z`;
}

export function renderStackedArea(payload: TrendsPayload): string {
  const series = stackedSeries(payload);
  const yMax = Math.max(1, ...series.totals);
  const parts: string[] = [
    `<svg class="stacked-area" viewBox="0 0 ${AREA_W} ${AREA_H}" role="img"` +
      ` data-totals="${series.totals.join(",")}">`,
  ];
  series.bands.forEach((band, i) => {
    parts.push(
      `<path class="band" d="${areaPath(band, series.years, yMax)}"` +
        ` fill="${PALETTE[i % PALETTE.length]}" fill-opacity="0.75"` +
        ` data-topic="${band.topic}"><title>${esc(band.label)}</title></path>`
    );
  });
  series.years.forEach((year, c) => {
    const n = series.years.length;
    const x =
      n === 1 ? AREA_W / 2 : AXIS_PAD + (c * (AREA_W - 2 * AXIS_PAD)) / (n - 1);
    parts.push(
      `<text class="col-label" x="${x.toFixed(2)}" y="${AREA_H - 8}" text-anchor="middle">${year}</text>`
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

function renderAlerts(payload: TrendsPayload): string {
  if (!payload.alerts.length) return "";
  const chips = payload.alerts
    .map(
      (a) =>
        `<span class="alert-chip" data-topic="${a.topic_id}">${esc(a.label)} — ${esc(a.rule)}</span>`
    )
    .join("");
  return `<div class="alerts">${chips}</div>`;
}

/**
 * Full trends section: heatmap plus stacked area, or an explicit
 * empty-state when the service has nothing to plot yet.
 */
export function renderTrends(payload: TrendsPayload | null): string {
  if (!payload || !hasTrendData(payload)) {
    return (
      `<section class="trends"><div class="empty-state">` +
      `No topic trends yet. Ingest records and fit the model to see activity over time.` +
      `</div></section>`
    );
  }
  const undatedTotal = Object.values(payload.undated).reduce((a, b) => a + b, 0);
  const note = undatedTotal
    ? `<p class="undated-note">${undatedTotal} records have no year and are not plotted.</p>`
    : "";
  return (
    `<section class="trends">` +
    `<h2>Topic activity by year</h2>` +
    renderHeatmap(payload) +
    `<h2>Topic composition</h2>` +
    renderStackedArea(payload) +
    renderAlerts(payload) +
    note +
    `</section>`
  );
}
