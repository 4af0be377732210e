/**
 * Figure rendering from harness CSVs.
 *
 * Three kinds: 'pareto' (recall vs QPS, log y, one series per comparator,
 * non-dominated points connected), 'ar_box' (approximation-ratio box plots
 * from the summary quantiles), 'fn_bars' (false-negative ratios, log y).
 *
 * Every plotted series is embedded verbatim in a data-series attribute on its
 * SVG group, so tests (and downstream tools) can parse the figure back and
 * compare against the CSV without rasterizing.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { CsvTable, num, parseCsv, requireColumns } from "./csv.js";
import { paretoFront } from "./pareto.js";
import {
  Margins,
  PALETTE,
  SvgDoc,
  drawAxes,
  esc,
  linearScale,
  logScale,
  logTicks,
  niceTicks,
} from "./svg.js";

export type FigureKind = "pareto" | "ar_box" | "fn_bars";

export interface FigureSpec {
  inputs: string[];
  kind: FigureKind;
  output: string;
  dataset?: string;
  /** plot the raw sweep instead of the non-dominated frontier (pareto only) */
  raw?: boolean;
  width?: number;
  height?: number;
}

export class EmptySelectionError extends Error {}

const MARGINS: Margins = { top: 28, right: 20, bottom: 40, left: 64 };

function loadRows(spec: FigureSpec, columns: string[]): Record<string, string>[] {
  if (spec.inputs.length === 0) {
    throw new Error("no input CSVs given");
  }
  const rows: Record<string, string>[] = [];
  for (const path of spec.inputs) {
    const table: CsvTable = parseCsv(readFileSync(path, "utf-8"));
    requireColumns(table, columns);
    rows.push(...table.rows);
  }
  const filtered = spec.dataset ? rows.filter((r) => r.dataset === spec.dataset) : rows;
  if (filtered.length === 0) {
    throw new EmptySelectionError(
      spec.dataset
        ? `no rows match dataset '${spec.dataset}'`
        : "no rows in the input CSVs",
    );
  }
  return filtered;
}

function groupBy(
  rows: Record<string, string>[],
  key: (row: Record<string, string>) => string,
): Map<string, Record<string, string>[]> {
  const groups = new Map<string, Record<string, string>[]>();
  for (const row of rows) {
    const k = key(row);
    const bucket = groups.get(k);
    if (bucket) bucket.push(row);
    else groups.set(k, [row]);
  }
  return groups;
}

function legend(doc: SvgDoc, names: string[]): void {
  let x = MARGINS.left + 4;
  const y = 16;
  names.forEach((name, i) => {
    const color = PALETTE[i % PALETTE.length];
    doc.add(`<rect x="${x}" y="${y - 8}" width="10" height="10" fill="${color}"/>`);
    doc.text(x + 14, y, name);
    x += 14 + 7 * name.length + 16;
  });
}

function renderPareto(spec: FigureSpec, doc: SvgDoc): void {
  const rows = loadRows(spec, ["dataset", "dco", "recall", "qps"]);
  const groups = groupBy(rows, (r) => r.dco);
  const series = [...groups.entries()].map(([dco, rs]) => {
    const points = rs.map((r) => ({ recall: num(r, "recall"), qps: num(r, "qps") }));
    const shown = spec.raw
      ? [...points].sort((a, b) => a.recall - b.recall || a.qps - b.qps)
      : paretoFront(points);
    return { dco, points: shown };
  });
  const all = series.flatMap((s) => s.points);
  const rLo = Math.min(...all.map((p) => p.recall));
  const rHi = Math.max(...all.map((p) => p.recall));
  const qLo = Math.min(...all.map((p) => p.qps));
  const qHi = Math.max(...all.map((p) => p.qps));
  const x = linearScale(rLo, rHi || 1, MARGINS.left, doc.width - MARGINS.right);
  const y = logScale(qLo > 0 ? qLo : 1e-3, qHi > 0 ? qHi : 1,
                     doc.height - MARGINS.bottom, MARGINS.top);
  drawAxes(
    doc,
    MARGINS,
    niceTicks(rLo, rHi).map((v) => ({ value: v, pos: x(v) })),
    logTicks(qLo > 0 ? qLo : 1e-3, qHi > 0 ? qHi : 1).map((v) => ({ value: v, pos: y(v) })),
    "recall",
    "queries per second",
  );
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const payload = esc(JSON.stringify({ dco: s.dco, points: s.points.map((p) => [p.recall, p.qps]) }));
    doc.openGroup(`class="series" data-series="${payload}"`);
    const path = s.points.map((p) => `${x(p.recall).toFixed(2)},${y(p.qps).toFixed(2)}`).join(" ");
    if (s.points.length > 1) {
      doc.add(`<polyline points="${path}" fill="none" stroke="${color}" stroke-width="1.6"/>`);
    }
    for (const p of s.points) {
      doc.add(
        `<circle cx="${x(p.recall).toFixed(2)}" cy="${y(p.qps).toFixed(2)}" r="3" fill="${color}"/>`,
      );
    }
    doc.closeGroup();
  });
  legend(doc, series.map((s) => s.dco));
}

function renderArBox(spec: FigureSpec, doc: SvgDoc): void {
  const rows = loadRows(spec, ["dataset", "dco", "q05", "q25", "q50", "q75", "q95"]);
  const lo = Math.min(...rows.map((r) => num(r, "q05")));
  const hi = Math.max(...rows.map((r) => num(r, "q95")));
  const pad = (hi - lo || 1) * 0.1;
  const y = linearScale(lo - pad, hi + pad, doc.height - MARGINS.bottom, MARGINS.top);
  const span = doc.width - MARGINS.left - MARGINS.right;
  const slot = span / rows.length;
  drawAxes(
    doc,
    MARGINS,
    rows.map((r, i) => ({ value: i, pos: MARGINS.left + slot * (i + 0.5) })).map((t) => ({
      value: t.value,
      pos: t.pos,
    })),
    niceTicks(lo - pad, hi + pad).map((v) => ({ value: v, pos: y(v) })),
    "",
    "estimated / true distance",
  );
  rows.forEach((r, i) => {
    const cx = MARGINS.left + slot * (i + 0.5);
    const half = Math.min(24, slot * 0.3);
    const color = PALETTE[i % PALETTE.length];
    const q = {
      q05: num(r, "q05"),
      q25: num(r, "q25"),
      q50: num(r, "q50"),
      q75: num(r, "q75"),
      q95: num(r, "q95"),
    };
    const payload = esc(JSON.stringify({ dco: r.dco, ...q }));
    doc.openGroup(`class="box" data-series="${payload}"`);
    const stroke = `stroke="${color}" stroke-width="1.4"`;
    doc.line(cx, y(q.q05), cx, y(q.q25), stroke);
    doc.line(cx, y(q.q75), cx, y(q.q95), stroke);
    doc.line(cx - half * 0.6, y(q.q05), cx + half * 0.6, y(q.q05), stroke);
    doc.line(cx - half * 0.6, y(q.q95), cx + half * 0.6, y(q.q95), stroke);
    doc.add(
      `<rect x="${(cx - half).toFixed(2)}" y="${y(q.q75).toFixed(2)}" ` +
        `width="${(2 * half).toFixed(2)}" height="${(y(q.q25) - y(q.q75)).toFixed(2)}" ` +
        `fill="${color}" fill-opacity="0.35" ${stroke}/>`,
    );
    doc.line(cx - half, y(q.q50), cx + half, y(q.q50), `stroke="${color}" stroke-width="2.2"`);
    doc.closeGroup();
    doc.text(cx, doc.height - MARGINS.bottom + 16, r.dco, 'text-anchor="middle"');
  });
}

function renderFnBars(spec: FigureSpec, doc: SvgDoc): void {
  const rows = loadRows(spec, ["dataset", "dco", "ef", "fn_ratio"]).filter(
    (r) => r.fn_ratio !== "",
  );
  if (rows.length === 0) {
    throw new EmptySelectionError("no rows carry a false-negative ratio (audit off?)");
  }
  const values = rows.map((r) => ({
    label: `${r.dco}@${r.ef}`,
    dco: r.dco,
    ef: num(r, "ef"),
    fn: num(r, "fn_ratio"),
  }));
  const positive = values.filter((v) => v.fn > 0).map((v) => v.fn);
  const floor = positive.length ? Math.min(...positive) / 10 : 1e-6;
  const hi = positive.length ? Math.max(...positive) : 1e-3;
  const y = logScale(floor, hi, doc.height - MARGINS.bottom, MARGINS.top);
  const span = doc.width - MARGINS.left - MARGINS.right;
  const slot = span / values.length;
  drawAxes(
    doc,
    MARGINS,
    [],
    logTicks(floor, hi).map((v) => ({ value: v, pos: y(v) })),
    "",
    "false negatives / comparisons",
  );
  const y0 = doc.height - MARGINS.bottom;
  values.forEach((v, i) => {
    const cx = MARGINS.left + slot * (i + 0.5);
    const half = Math.min(22, slot * 0.35);
    const color = PALETTE[i % PALETTE.length];
    // zero ratios draw as a flat tick at the baseline; the exact value is
    // still embedded for parse-back
    const top = v.fn > 0 ? y(v.fn) : y0 - 1;
    const payload = esc(JSON.stringify({ dco: v.dco, ef: v.ef, fn_ratio: v.fn }));
    doc.openGroup(`class="bar" data-series="${payload}"`);
    doc.add(
      `<rect x="${(cx - half).toFixed(2)}" y="${top.toFixed(2)}" ` +
        `width="${(2 * half).toFixed(2)}" height="${(y0 - top).toFixed(2)}" fill="${color}"/>`,
    );
    doc.closeGroup();
    doc.text(cx, y0 + 16, v.label, 'text-anchor="middle"');
  });
}

/** Render the figure to an SVG string. */
export function render(spec: FigureSpec): string {
  const doc = new SvgDoc(spec.width ?? 640, spec.height ?? 420);
  switch (spec.kind) {
    case "pareto":
      renderPareto(spec, doc);
      break;
    case "ar_box":
      renderArBox(spec, doc);
      break;
    case "fn_bars":
      renderFnBars(spec, doc);
      break;
    default:
      throw new Error(`unknown figure kind '${(spec as FigureSpec).kind}'`);
  }
  return doc.render();
}

/** Render and write; nothing is written when the selection is empty or invalid. */
export function renderToFile(spec: FigureSpec): void {
  const svg = render(spec);
  writeFileSync(spec.output, svg, "utf-8");
}

/** Parse the embedded data series back out of a rendered figure. */
export function extractSeries(svg: string): unknown[] {
  const out: unknown[] = [];
  const re = /data-series="([^"]*)"/g;
  let match: RegExpExecArray | null;
  while ((match = re.exec(svg)) !== null) {
    const json = match[1]
      .replace(/&quot;/g, '"')
      .replace(/&lt;/g, "<")
      .replace(/&gt;/g, ">")
      .replace(/&amp;/g, "&");
    out.push(JSON.parse(json));
  }
  return out;
}
