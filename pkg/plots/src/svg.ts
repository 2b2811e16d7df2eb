/** Minimal deterministic SVG assembly: scales, ticks, axes, series. */

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

/** Round tick positions covering the domain (1/2/5 ladder). */
export function ticks(domain: [number, number], count = 5): number[] {
  const [lo, hi] = domain;
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export function extent(series: ArrayLike<number>): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < series.length; i++) {
    const v = series[i];
    if (Number.isFinite(v)) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

export function padded(domain: [number, number], frac = 0.08): [number, number] {
  const pad = (domain[1] - domain[0]) * frac;
  return [domain[0] - pad, domain[1] + pad];
}

const fmt = (v: number): string => {
  const s = v.toFixed(6);
  return s.replace(/\.?0+$/, "") || "0";
};

export const num = fmt;

export class SvgBuilder {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
      `fill="${fill}"${opacity < 1 ? ` fill-opacity="${fmt(opacity)}"` : ""}/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string,
       width = 1, dash?: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${fmt(width)}"` +
      (dash ? ` stroke-dasharray="${dash}"` : "") + "/>");
  }

  polyline(xs: ArrayLike<number>, ys: ArrayLike<number>, xscale: Scale,
           yscale: Scale, stroke: string, width = 1.2, dash?: string): void {
    const pts: string[] = [];
    for (let i = 0; i < xs.length; i++) {
      if (Number.isFinite(xs[i]) && Number.isFinite(ys[i])) {
        pts.push(`${fmt(xscale(xs[i]))},${fmt(yscale(ys[i]))}`);
      }
    }
    this.parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${stroke}" ` +
      `stroke-width="${fmt(width)}"` +
      (dash ? ` stroke-dasharray="${dash}"` : "") + "/>");
  }

  text(x: number, y: number, content: string, size = 11,
       anchor: "start" | "middle" | "end" = "start", fill = "#222"): void {
    const escaped = content.replace(/&/g, "&amp;").replace(/</g, "&lt;");
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
      `text-anchor="${anchor}" fill="${fill}">${escaped}</text>`);
  }

  toString(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export interface PanelBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Axes, grid ticks, and labels for one panel; returns the data scales. */
export function drawPanel(svg: SvgBuilder, box: PanelBox,
                          xdom: [number, number], ydom: [number, number],
                          xlabel: string, ylabel: string): { x: Scale; y: Scale } {
  const x = linearScale(xdom, [box.x, box.x + box.w]);
  const y = linearScale(ydom, [box.y + box.h, box.y]);
  for (const tv of ticks(ydom)) {
    svg.line(box.x, y(tv), box.x + box.w, y(tv), "#ddd", 0.6);
    svg.text(box.x - 6, y(tv) + 3.5, num(tv), 9, "end", "#555");
  }
  for (const tv of ticks(xdom)) {
    svg.line(x(tv), box.y + box.h, x(tv), box.y + box.h + 4, "#555", 0.8);
    svg.text(x(tv), box.y + box.h + 14, num(tv), 9, "middle", "#555");
  }
  svg.line(box.x, box.y, box.x, box.y + box.h, "#333", 1);
  svg.line(box.x, box.y + box.h, box.x + box.w, box.y + box.h, "#333", 1);
  svg.text(box.x + box.w / 2, box.y + box.h + 28, xlabel, 10, "middle");
  svg.text(box.x + 4, box.y - 5, ylabel, 10, "start");
  return { x, y };
}
