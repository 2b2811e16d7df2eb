/** The three report figures rendered from trace/metrics files. */

import { SchemaError, Trace, col, disturbanceWindows, setpointSeries } from "./trace.js";
import { PanelBox, SvgBuilder, drawPanel, extent, num, padded } from "./svg.js";

const SERIES_COLOR = "#1f6fb4";
const TARGET_COLOR = "#c0392b";
const SHADE_COLOR = "#f3c17d";

function shade(svg: SvgBuilder, box: PanelBox, xscale: (v: number) => number,
               windows: Array<[number, number]>): void {
  for (const [t0, t1] of windows) {
    const x0 = xscale(t0);
    svg.rect(x0, box.y, xscale(t1) - x0, box.h, SHADE_COLOR, 0.35);
  }
}

/** Three stacked panels: world x, y, z against time, setpoint dashed. */
export function renderPositionKeeping(trace: Trace): string {
  const width = 720;
  const panelH = 150;
  const margin = { left: 64, right: 24, top: 34, gap: 46, bottom: 44 };
  const height = margin.top + 3 * panelH + 2 * margin.gap + margin.bottom;
  const svg = new SvgBuilder(width, height);
  svg.text(width / 2, 18, "Position keeping (world XYZ)", 13, "middle");

  const t = col(trace, "t");
  const tdom = extent(t);
  const windows = disturbanceWindows(trace);
  const axes: Array<["px" | "py" | "pz", 0 | 1 | 2, string]> = [
    ["px", 0, "x [m]"], ["py", 1, "y [m]"], ["pz", 2, "z [m]"]];
  axes.forEach(([name, axis, label], k) => {
    const box: PanelBox = {
      x: margin.left,
      y: margin.top + k * (panelH + margin.gap),
      w: width - margin.left - margin.right,
      h: panelH,
    };
    const series = col(trace, name);
    const sp = setpointSeries(trace, axis);
    const ydom = padded(extent(Float64Array.from([...series, ...sp.filter(Number.isFinite)])));
    const scales = drawPanel(svg, box, tdom, ydom, k === 2 ? "t [s]" : "",
                             label);
    shade(svg, box, scales.x, windows);
    if (sp.some(Number.isFinite)) {
      svg.polyline(t, sp, scales.x, scales.y, TARGET_COLOR, 1, "5,4");
    }
    svg.polyline(t, series, scales.x, scales.y, SERIES_COLOR);
  });
  return svg.toString();
}

/** Endpoint x and z against time with the held target overlaid. */
export function renderEndpointXz(trace: Trace): string {
  const epx = col(trace, "epx");
  const epz = col(trace, "epz");
  if (![...epx].some(Number.isFinite) || ![...epz].some(Number.isFinite)) {
    throw new SchemaError("trace has empty endpoint columns epx/epz "
      + "(vehicle without an arm?)");
  }
  const width = 720;
  const panelH = 190;
  const margin = { left: 64, right: 24, top: 34, gap: 46, bottom: 44 };
  const height = margin.top + 2 * panelH + margin.gap + margin.bottom;
  const svg = new SvgBuilder(width, height);
  svg.text(width / 2, 18, "End-point tracking (XZ)", 13, "middle");

  const t = col(trace, "t");
  const tdom = extent(t);
  const windows = disturbanceWindows(trace);
  const target = trace.meta?.endpoint_target ?? null;
  const panels: Array<[Float64Array, number | null, string]> = [
    [epx, target ? target[0] : null, "endpoint x [m]"],
    [epz, target ? target[2] : null, "endpoint z [m]"]];
  panels.forEach(([series, tv, label], k) => {
    const box: PanelBox = {
      x: margin.left,
      y: margin.top + k * (panelH + margin.gap),
      w: width - margin.left - margin.right,
      h: panelH,
    };
    const values = tv === null ? series : Float64Array.from([...series, tv]);
    const scales = drawPanel(svg, box, tdom, padded(extent(values)),
                             k === 1 ? "t [s]" : "", label);
    shade(svg, box, scales.x, windows);
    if (tv !== null) {
      svg.line(scales.x(tdom[0]), scales.y(tv), scales.x(tdom[1]),
               scales.y(tv), TARGET_COLOR, 1, "5,4");
    }
    svg.polyline(t, series, scales.x, scales.y, SERIES_COLOR);
  });
  return svg.toString();
}

export interface PairMetrics {
  free_std_mm: number;
  disturbed_std_mm: number;
  error_increase_pct: number;
}

export interface MetricsReport {
  pairs: Record<string, PairMetrics>;
  comparison_axis?: string;
}

export function parseReport(text: string): MetricsReport {
  const doc = JSON.parse(text) as MetricsReport;
  if (!doc.pairs || Object.keys(doc.pairs).length === 0) {
    throw new SchemaError("metrics report has no 'pairs' block; "
      + "produce it with: amm metrics --pair LABEL FREE DISTURBED");
  }
  for (const [label, pair] of Object.entries(doc.pairs)) {
    for (const key of ["free_std_mm", "disturbed_std_mm",
                       "error_increase_pct"] as const) {
      if (typeof pair[key] !== "number") {
        throw new SchemaError(`pair '${label}' is missing field '${key}'`);
      }
    }
  }
  return doc;
}

/** Comparison table: one column per vehicle, the classic three rows. */
export function renderTable(report: MetricsReport): string {
  const labels = Object.keys(report.pairs).sort();
  const rowNames = ["Free hovering [mm]", "Under disturbance [mm]",
                    "Increased error [%]"];
  const cellW = 150;
  const headW = 190;
  const cellH = 34;
  const width = headW + labels.length * cellW + 40;
  const height = (rowNames.length + 1) * cellH + 76;
  const svg = new SvgBuilder(width, height);
  const axis = report.comparison_axis ?? "x";
  svg.text(width / 2, 22, `Position-error standard deviation (${axis}-axis)`,
           13, "middle");
  const x0 = 20;
  const y0 = 40;
  const rows = (pair: PairMetrics) => [
    pair.free_std_mm, pair.disturbed_std_mm, pair.error_increase_pct];

  svg.rect(x0, y0, headW + labels.length * cellW, cellH, "#e8eef5");
  svg.text(x0 + 8, y0 + cellH - 12, "Configuration", 11);
  labels.forEach((label, i) => {
    svg.text(x0 + headW + i * cellW + cellW / 2, y0 + cellH - 12, label, 11,
             "middle");
  });
  rowNames.forEach((name, r) => {
    const y = y0 + (r + 1) * cellH;
    if (r % 2 === 0) {
      svg.rect(x0, y, headW + labels.length * cellW, cellH, "#f7f9fb");
    }
    svg.text(x0 + 8, y + cellH - 12, name, 11);
    labels.forEach((label, i) => {
      const value = rows(report.pairs[label])[r];
      svg.text(x0 + headW + i * cellW + cellW / 2, y + cellH - 12,
               num(Math.round(value * 10000) / 10000), 11, "middle");
    });
  });
  const tableW = headW + labels.length * cellW;
  for (let r = 0; r <= rowNames.length + 1; r++) {
    svg.line(x0, y0 + r * cellH, x0 + tableW, y0 + r * cellH, "#888", 0.8);
  }
  svg.line(x0, y0, x0, y0 + (rowNames.length + 1) * cellH, "#888", 0.8);
  for (let i = 0; i <= labels.length; i++) {
    const x = x0 + headW + i * cellW;
    svg.line(x, y0, x, y0 + (rowNames.length + 1) * cellH, "#888", 0.8);
  }
  svg.line(x0 + tableW, y0, x0 + tableW, y0 + (rowNames.length + 1) * cellH,
           "#888", 0.8);
  return svg.toString();
}
