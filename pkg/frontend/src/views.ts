/**
 * View models and tiny renderers. Every number shown is taken verbatim
 * from a service response; these functions only arrange, never compute.
 */

import type { QueryResponse, UnicityRow } from "./api.js";

export interface CandidateViewRow {
  cardId: number;
  typeBadge: string;
  cardType: number;
  firstSeen: string;
  lastSeen: string;
  eventCount: number;
}

export interface CandidatesViewModel {
  banner: string;
  state: "normal" | "unique" | "empty";
  hint: string | null;
  rows: CandidateViewRow[];
  truncated: boolean;
}

export function candidatesView(response: QueryResponse): CandidatesViewModel {
  const total = response.total;
  const state = total === 0 ? "empty" : total === 1 ? "unique" : "normal";
  return {
    banner: `${total} candidate${total === 1 ? "" : "s"}`,
    state,
    hint: state === "empty"
      ? "No cards match all constraints — try removing one."
      : state === "unique"
        ? "Unique match — inspect the timeline to confirm."
        : null,
    rows: response.preview.map((row) => ({
      cardId: row.cardId,
      typeBadge: `type ${row.cardType}`,
      cardType: row.cardType,
      firstSeen: row.firstSeen,
      lastSeen: row.lastSeen,
      eventCount: row.eventCount,
    })),
    truncated: response.preview.length < total,
  };
}

export interface ChartPoint {
  n: number;
  percent: number;
}

export interface ChartSeries {
  key: string;
  granularity: string;
  location: string;
  points: ChartPoint[];
}

/** Parse the CLI's report CSV into rows of the JSON report shape. */
export function parseUnicityCsv(text: string): UnicityRow[] {
  const lines = text.trim().split(/\r?\n/);
  const header = "granularity,location,n,cardsConsidered,cardsUnique,percentUnique";
  if (lines[0] !== header) {
    throw new Error("malformed report: unexpected header");
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 6) {
      throw new Error(`malformed report: row ${i + 1}`);
    }
    return {
      granularity: parts[0],
      location: parts[1],
      n: Number(parts[2]),
      cardsConsidered: Number(parts[3]),
      cardsUnique: Number(parts[4]),
      percentUnique: Number(parts[5]),
    };
  });
}

/** Group report rows into one series per (granularity, location). Rows
 * with percentages outside [0, 100] are rejected as malformed. */
export function unicityChartModel(rows: UnicityRow[]): ChartSeries[] {
  const series = new Map<string, ChartSeries>();
  for (const row of rows) {
    if (!Number.isFinite(row.percentUnique)
        || row.percentUnique < 0 || row.percentUnique > 100) {
      throw new Error(`malformed report: percentUnique ${row.percentUnique}`);
    }
    if (!Number.isInteger(row.n) || row.n < 1) {
      throw new Error(`malformed report: cardinality ${row.n}`);
    }
    const key = `${row.granularity}/${row.location}`;
    let s = series.get(key);
    if (!s) {
      s = { key, granularity: row.granularity, location: row.location, points: [] };
      series.set(key, s);
    }
    s.points.push({ n: row.n, percent: row.percentUnique });
  }
  const out = [...series.values()];
  for (const s of out) {
    s.points.sort((a, b) => a.n - b.n);
  }
  return out;
}

const PALETTE = ["#1668b8", "#c23e1e", "#1e8a4c", "#8445b8", "#b88a16",
                 "#16a0b8", "#b81668", "#5a6b7a", "#7ab816", "#44322a"];

/** Percent-unique vs set cardinality as a self-contained SVG string;
 * single-point series render as a marker. */
export function chartSvg(series: ChartSeries[], width = 640, height = 360): string {
  const margin = { top: 16, right: 16, bottom: 36, left: 44 };
  const w = width - margin.left - margin.right;
  const h = height - margin.top - margin.bottom;
  const maxN = Math.max(1, ...series.flatMap((s) => s.points.map((p) => p.n)));
  const minN = Math.min(maxN, ...series.flatMap((s) => s.points.map((p) => p.n)));
  const x = (n: number) => maxN === minN
    ? margin.left + w / 2
    : margin.left + ((n - minN) / (maxN - minN)) * w;
  const y = (pct: number) => margin.top + (1 - pct / 100) * h;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" `
    + `width="${width}" height="${height}" role="img">`);
  for (const pct of [0, 25, 50, 75, 100]) {
    const gy = y(pct).toFixed(1);
    parts.push(`<line x1="${margin.left}" y1="${gy}" x2="${width - margin.right}" `
      + `y2="${gy}" stroke="#ddd" stroke-width="1"/>`);
    parts.push(`<text x="${margin.left - 6}" y="${gy}" text-anchor="end" `
      + `dominant-baseline="middle" font-size="10" fill="#666">${pct}%</text>`);
  }
  for (let n = minN; n <= maxN; n++) {
    parts.push(`<text x="${x(n).toFixed(1)}" y="${height - margin.bottom + 14}" `
      + `text-anchor="middle" font-size="10" fill="#666">${n}</text>`);
  }
  parts.push(`<text x="${margin.left + w / 2}" y="${height - 6}" text-anchor="middle" `
    + `font-size="11" fill="#444">events sampled per card</text>`);
  series.forEach((s, i) => {
    const colour = PALETTE[i % PALETTE.length];
    const coords = s.points.map((p) => `${x(p.n).toFixed(1)},${y(p.percent).toFixed(1)}`);
    if (coords.length > 1) {
      parts.push(`<polyline points="${coords.join(" ")}" fill="none" `
        + `stroke="${colour}" stroke-width="1.8"/>`);
    }
    for (const c of coords) {
      const [cx, cy] = c.split(",");
      parts.push(`<circle cx="${cx}" cy="${cy}" r="3" fill="${colour}"/>`);
    }
    parts.push(`<text x="${width - margin.right}" y="${margin.top + 14 * (i + 1)}" `
      + `text-anchor="end" font-size="10" fill="${colour}">`
      + `${s.granularity} (${s.location} location)</text>`);
  });
  parts.push("</svg>");
  return parts.join("");
}
