import { column, numericColumn, requireColumns, SchemaError, Table } from "./csv.js";
import { extent, linearScale, log2Scale, log10Scale, Scale } from "./scale.js";
import {
  DEFAULT_MARGIN,
  document as svgDocument,
  fmt,
  line,
  polyline,
  SERIES_COLORS,
  tag,
  text,
} from "./svg.js";

export type FigureKind = "batchsize_curve" | "training_curve" | "heatmap" | "rate_plot";

const WIDTH = 640;
const HEIGHT = 440;

interface Frame {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

function frame(): Frame {
  const m = DEFAULT_MARGIN;
  return { x0: m.left, x1: WIDTH - m.right, y0: HEIGHT - m.bottom, y1: m.top };
}

function axes(
  f: Frame,
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
  title: string,
): string[] {
  const parts: string[] = [];
  parts.push(line(f.x0, f.y0, f.x1, f.y0, { stroke: "black" }));
  parts.push(line(f.x0, f.y0, f.x0, f.y1, { stroke: "black" }));
  for (const t of xScale.ticks()) {
    const x = xScale(t.value);
    parts.push(line(x, f.y0, x, f.y0 + 4, { stroke: "black" }));
    parts.push(text(x, f.y0 + 18, t.label, { "text-anchor": "middle" }));
  }
  for (const t of yScale.ticks()) {
    const y = yScale(t.value);
    parts.push(line(f.x0 - 4, y, f.x0, y, { stroke: "black" }));
    parts.push(text(f.x0 - 8, y + 4, t.label, { "text-anchor": "end" }));
    parts.push(line(f.x0, y, f.x1, y, { stroke: "#dddddd", "stroke-width": 0.5 }));
  }
  parts.push(text((f.x0 + f.x1) / 2, HEIGHT - 10, xLabel, { "text-anchor": "middle" }));
  parts.push(
    tag(
      "text",
      {
        x: 16,
        y: (f.y0 + f.y1) / 2,
        "font-size": 12,
        "font-family": "sans-serif",
        "text-anchor": "middle",
        transform: `rotate(-90 16 ${fmt((f.y0 + f.y1) / 2)})`,
      },
      yLabel,
    ),
  );
  parts.push(text((f.x0 + f.x1) / 2, 20, title, { "text-anchor": "middle", "font-size": 14 }));
  return parts;
}

function legend(f: Frame, entries: Array<{ label: string; color: string; dashed?: boolean }>): string[] {
  return entries.flatMap((e, i) => {
    const y = f.y1 + 14 + 16 * i;
    const attrs: Record<string, string | number> = { stroke: e.color, "stroke-width": 2 };
    if (e.dashed) attrs["stroke-dasharray"] = "6 4";
    return [
      line(f.x1 - 150, y, f.x1 - 122, y, attrs),
      text(f.x1 - 116, y + 4, e.label),
    ];
  });
}

function seriesMarkers(pts: Array<[number, number]>, color: string): string {
  return pts.map(([x, y]) => tag("circle", { cx: x, cy: y, r: 3, fill: color })).join("");
}

/** Group the `mean` rows (or average plain seed rows) of a sweep summary. */
function summarySeries(table: Table): Map<string, Array<{ n: number; err: number }>> {
  requireColumns(table, ["method", "batch_size", "seed", "final_rel_l2"]);
  const method = column(table, "method");
  const batch = column(table, "batch_size");
  const seed = column(table, "seed");
  const err = column(table, "final_rel_l2");
  const agg = new Map<string, { sum: number; count: number; mean?: number }>();
  for (let i = 0; i < method.length; i += 1) {
    if (seed[i] === "std") continue;
    const key = `${method[i]}|${batch[i]}`;
    const entry = agg.get(key) ?? { sum: 0, count: 0 };
    const value = Number(err[i]);
    if (!Number.isFinite(value)) {
      throw new SchemaError(`${table.path}: non-numeric final_rel_l2 "${err[i]}"`);
    }
    if (seed[i] === "mean") {
      entry.mean = value;
    } else {
      entry.sum += value;
      entry.count += 1;
    }
    agg.set(key, entry);
  }
  const series = new Map<string, Array<{ n: number; err: number }>>();
  for (const [key, entry] of agg) {
    const [m, b] = key.split("|");
    const value = entry.mean ?? entry.sum / Math.max(entry.count, 1);
    const list = series.get(m) ?? [];
    list.push({ n: Number(b), err: value });
    series.set(m, list);
  }
  for (const list of series.values()) {
    list.sort((a, b) => a.n - b.n);
  }
  return series;
}

/** Figs. 1/4 family: mean final error vs batch size, one series per method. */
export function batchsizeCurve(tables: Table[]): string {
  const series = new Map<string, Array<{ n: number; err: number }>>();
  for (const t of tables) {
    for (const [m, list] of summarySeries(t)) {
      series.set(m, (series.get(m) ?? []).concat(list));
    }
  }
  if (series.size === 0) {
    throw new SchemaError("no usable summary rows in the inputs");
  }
  const f = frame();
  const ns = [...series.values()].flat().map((p) => p.n);
  const errs = [...series.values()].flat().map((p) => p.err);
  const xScale = log2Scale(extent(ns), [f.x0, f.x1]);
  const yScale = log10Scale(extent(errs), [f.y0, f.y1]);
  const body = axes(f, xScale, yScale, "batch size", "relative L2 error",
    "relative error vs batch size");
  const entries: Array<{ label: string; color: string }> = [];
  let i = 0;
  for (const [method, pts] of series) {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const xy = pts.map((p) => [xScale(p.n), yScale(p.err)] as [number, number]);
    body.push(polyline(xy, { stroke: color, "stroke-width": 2 }));
    body.push(seriesMarkers(xy, color));
    entries.push({ label: method, color });
    i += 1;
  }
  body.push(...legend(f, entries));
  return svgDocument(WIDTH, HEIGHT, body);
}

/** Figs. 2/5 family: relative error over training iterations, one series per file. */
export function trainingCurve(tables: Table[]): string {
  const f = frame();
  const series = tables.map((t) => {
    requireColumns(t, ["iteration", "rel_l2"]);
    return {
      label: t.path.replace(/\\/g, "/").split("/").slice(-2).join("/"),
      iters: numericColumn(t, "iteration"),
      errs: numericColumn(t, "rel_l2"),
    };
  });
  const xScale = linearScale(extent(series.flatMap((s) => s.iters)), [f.x0, f.x1]);
  const yScale = log10Scale(extent(series.flatMap((s) => s.errs)), [f.y0, f.y1]);
  const body = axes(f, xScale, yScale, "iteration", "relative L2 error",
    "training relative error");
  const entries: Array<{ label: string; color: string }> = [];
  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const xy = s.iters.map((it, k) => [xScale(it), yScale(s.errs[k])] as [number, number]);
    body.push(polyline(xy, { stroke: color, "stroke-width": 1.5 }));
    entries.push({ label: s.label, color });
  });
  body.push(...legend(f, entries));
  return svgDocument(WIDTH, HEIGHT, body);
}

function colorRamp(t: number): string {
  // dark blue -> teal -> yellow, clamped
  const stops: Array<[number, [number, number, number]]> = [
    [0.0, [68, 1, 84]],
    [0.5, [33, 145, 140]],
    [1.0, [253, 231, 37]],
  ];
  const v = Math.min(1, Math.max(0, t));
  for (let i = 0; i < stops.length - 1; i += 1) {
    const [t0, c0] = stops[i];
    const [t1, c1] = stops[i + 1];
    if (v <= t1) {
      const w = (v - t0) / (t1 - t0);
      const rgb = c0.map((c, k) => Math.round(c + w * (c1[k] - c)));
      return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
    }
  }
  return "rgb(253,231,37)";
}

/** Figs. 3/6 family: per-cell values of a projection grid CSV. */
export function heatmap(table: Table, valueColumn = "rel_err"): string {
  requireColumns(table, ["x1", "x2", valueColumn]);
  const x1 = numericColumn(table, "x1");
  const x2 = numericColumn(table, "x2");
  const vals = numericColumn(table, valueColumn);
  const xs = [...new Set(x1)].sort((a, b) => a - b);
  const ys = [...new Set(x2)].sort((a, b) => a - b);
  if (xs.length * ys.length !== vals.length) {
    throw new SchemaError(
      `${table.path}: rows do not form a full grid `
      + `(${xs.length} x ${ys.length} != ${vals.length})`,
    );
  }
  const f = frame();
  const lo = Math.min(...vals);
  const hi = Math.max(...vals);
  const span = hi - lo || 1;
  const cellW = (f.x1 - f.x0) / xs.length;
  const cellH = (f.y0 - f.y1) / ys.length;
  const xIndex = new Map(xs.map((v, i) => [v, i]));
  const yIndex = new Map(ys.map((v, i) => [v, i]));
  const body: string[] = [];
  for (let i = 0; i < vals.length; i += 1) {
    const cx = xIndex.get(x1[i])!;
    const cy = yIndex.get(x2[i])!;
    body.push(
      tag("rect", {
        x: f.x0 + cx * cellW,
        y: f.y0 - (cy + 1) * cellH,
        width: cellW + 0.5,
        height: cellH + 0.5,
        fill: colorRamp((vals[i] - lo) / span),
      }),
    );
  }
  body.push(text((f.x0 + f.x1) / 2, 20,
    `${valueColumn} over the projection grid`, { "text-anchor": "middle", "font-size": 14 }));
  body.push(text(f.x0, HEIGHT - 10,
    `min ${lo.toExponential(3)}  max ${hi.toExponential(3)}`));
  body.push(text((f.x0 + f.x1) / 2, HEIGHT - 26, "x1", { "text-anchor": "middle" }));
  return svgDocument(WIDTH, HEIGHT, body);
}

/** Log-log mean integration error vs n with fitted and reference slopes. */
export function ratePlot(rates: Table, slopes: Table): string {
  requireColumns(rates, ["method", "n", "replicate", "abs_error"]);
  requireColumns(slopes, ["method", "slope", "intercept", "r2"]);
  const methods = column(rates, "method");
  const ns = numericColumn(rates, "n");
  const errs = numericColumn(rates, "abs_error");
  const bins = new Map<string, Map<number, number[]>>();
  for (let i = 0; i < methods.length; i += 1) {
    const byN = bins.get(methods[i]) ?? new Map<number, number[]>();
    const list = byN.get(ns[i]) ?? [];
    list.push(errs[i]);
    byN.set(ns[i], list);
    bins.set(methods[i], byN);
  }
  const means = new Map<string, Array<{ n: number; err: number }>>();
  for (const [m, byN] of bins) {
    const pts = [...byN.entries()]
      .map(([n, list]) => ({ n, err: list.reduce((a, b) => a + b, 0) / list.length }))
      .sort((a, b) => a.n - b.n);
    means.set(m, pts);
  }
  const f = frame();
  const allN = [...means.values()].flat().map((p) => p.n);
  const allE = [...means.values()].flat().map((p) => p.err);
  const nRange = extent(allN);
  const xScale = log2Scale(nRange, [f.x0, f.x1]);
  const eRange = extent(allE);
  // widen so the n^-1 guide stays inside the canvas
  const guideFloor = eRange[1] * (nRange[0] / nRange[1]);
  const yScale = log10Scale([Math.min(eRange[0], guideFloor), eRange[1]], [f.y0, f.y1]);
  const body = axes(f, xScale, yScale, "sample size n", "mean |In - I|",
    "integration error vs sample size");
  const entries: Array<{ label: string; color: string; dashed?: boolean }> = [];
  let i = 0;
  for (const [method, pts] of means) {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const xy = pts.map((p) => [xScale(p.n), yScale(p.err)] as [number, number]);
    body.push(polyline(xy, { stroke: color, "stroke-width": 2 }));
    body.push(seriesMarkers(xy, color));
    const fitRow = column(slopes, "method").indexOf(method);
    if (fitRow >= 0) {
      const slope = numericColumn(slopes, "slope")[fitRow];
      const intercept = numericColumn(slopes, "intercept")[fitRow];
      const fitted = pts.map((p) => {
        const value = 2 ** (slope * Math.log2(p.n) + intercept);
        return [xScale(p.n), yScale(value)] as [number, number];
      });
      body.push(polyline(fitted, {
        stroke: color,
        "stroke-width": 1,
        "stroke-dasharray": "2 3",
      }));
      entries.push({ label: `${method} (slope ${slope.toFixed(2)})`, color });
    } else {
      entries.push({ label: method, color });
    }
    i += 1;
  }
  // reference decay rates anchored at the top-left data point
  const anchor = eRange[1];
  for (const [slope, id, label] of [
    [-0.5, "guide-n-half", "n^-1/2"],
    [-1.0, "guide-n-1", "n^-1"],
  ] as Array<[number, string, string]>) {
    const pts = [nRange[0], nRange[1]].map((n) => {
      const value = anchor * (n / nRange[0]) ** slope;
      return [xScale(n), yScale(value)] as [number, number];
    });
    body.push(polyline(pts, {
      id,
      stroke: "#555555",
      "stroke-width": 1.5,
      "stroke-dasharray": "8 5",
    }));
    entries.push({ label, color: "#555555", dashed: true });
  }
  body.push(...legend(f, entries));
  return svgDocument(WIDTH, HEIGHT, body);
}

export function render(kind: FigureKind, tables: Table[], valueColumn?: string): string {
  switch (kind) {
    case "batchsize_curve":
      return batchsizeCurve(tables);
    case "training_curve":
      return trainingCurve(tables);
    case "heatmap":
      if (tables.length !== 1) throw new SchemaError("heatmap takes exactly one grid CSV");
      return heatmap(tables[0], valueColumn);
    case "rate_plot":
      if (tables.length !== 2) {
        throw new SchemaError("rate_plot takes rates.csv and slopes.csv, in that order");
      }
      return ratePlot(tables[0], tables[1]);
    default:
      throw new SchemaError(`unknown figure kind "${kind}"`);
  }
}
