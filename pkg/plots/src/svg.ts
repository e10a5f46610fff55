/** Small SVG document builder; output is deterministic for fixed input. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 36, right: 24, bottom: 48, left: 64 };

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const s = x.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.?0+e/, "e") : s;
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  body = "",
): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : esc(String(v))}"`)
    .join(" ");
  return body === "" ? `<${name} ${parts}/>` : `<${name} ${parts}>${body}</${name}>`;
}

export function line(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  attrs: Record<string, string | number> = {},
): string {
  return tag("line", { x1, y1, x2, y2, ...attrs });
}

export function text(
  x: number,
  y: number,
  content: string,
  attrs: Record<string, string | number> = {},
): string {
  return tag("text", { x, y, "font-size": 12, "font-family": "sans-serif", ...attrs }, esc(content));
}

export function polyline(
  points: Array<[number, number]>,
  attrs: Record<string, string | number> = {},
): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return tag("polyline", { points: pts, fill: "none", ...attrs });
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    tag("rect", { x: 0, y: 0, width, height, fill: "white" }),
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

export const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
