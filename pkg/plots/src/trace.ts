/** Trace CSV reader for the simulator's fixed column schema. */

import { readFileSync, existsSync } from "node:fs";

export const TRACE_COLUMNS = [
  "t", "px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz",
  "wx", "wy", "wz", "q1", "q2", "qd1", "qd2", "epx", "epz",
  "fx", "fy", "fz", "tx", "ty", "tz", "w1", "w2", "w3", "w4", "w5", "w6",
  "windx", "windy", "windz", "flags",
] as const;

export type TraceColumn = (typeof TRACE_COLUMNS)[number];

export class SchemaError extends Error {}

export interface SetpointEntry {
  t_s: number;
  position_m: [number, number, number];
  yaw_rad?: number;
}

export interface TraceMeta {
  setpoints: SetpointEntry[];
  endpoint_target: [number, number, number] | null;
  has_arm?: boolean;
}

export interface Trace {
  /** column name -> numeric series (empty cells become NaN) */
  columns: Map<TraceColumn, Float64Array>;
  rows: number;
  meta: TraceMeta | null;
}

export function col(trace: Trace, name: TraceColumn): Float64Array {
  const series = trace.columns.get(name);
  if (!series) throw new SchemaError(`trace has no column '${name}'`);
  return series;
}

export function parseTraceCsv(text: string, meta: TraceMeta | null = null): Trace {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length < 2) throw new SchemaError("trace has a header but no rows");
  const header = lines[0].split(",");
  const expected = TRACE_COLUMNS as readonly string[];
  const missing = expected.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`trace is missing column(s): ${missing.join(", ")}`);
  }
  const extra = header.filter((c) => !expected.includes(c));
  if (extra.length > 0) {
    throw new SchemaError(`trace has unexpected column(s): ${extra.join(", ")}`);
  }
  const index = new Map(header.map((name, i) => [name, i]));
  const rows = lines.length - 1;
  const columns = new Map<TraceColumn, Float64Array>();
  for (const name of TRACE_COLUMNS) {
    columns.set(name, new Float64Array(rows));
  }
  for (let r = 0; r < rows; r++) {
    const cells = lines[r + 1].split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(
        `row ${r + 1} has ${cells.length} cells, expected ${header.length}`);
    }
    for (const name of TRACE_COLUMNS) {
      const cell = cells[index.get(name)!];
      columns.get(name)![r] = cell === "" ? NaN : Number(cell);
    }
  }
  return { columns, rows, meta };
}

export function loadTrace(path: string): Trace {
  const text = readFileSync(path, "utf8");
  const metaPath = path.replace(/\.csv$/, ".meta.json");
  let meta: TraceMeta | null = null;
  if (existsSync(metaPath)) {
    meta = JSON.parse(readFileSync(metaPath, "utf8")) as TraceMeta;
  }
  return parseTraceCsv(text, meta);
}

/** Per-row setpoint position on one axis (last schedule entry at or before t). */
export function setpointSeries(trace: Trace, axis: 0 | 1 | 2): Float64Array {
  const t = col(trace, "t");
  const out = new Float64Array(trace.rows);
  const schedule = trace.meta?.setpoints ?? [];
  for (let i = 0; i < trace.rows; i++) {
    let value = NaN;
    for (const sp of schedule) {
      if (t[i] >= sp.t_s) value = sp.position_m[axis];
    }
    out[i] = value;
  }
  return out;
}

/**
 * Sustained-wind intervals for shading: the 0.25 s moving average of the
 * wind magnitude, thresholded at half its peak (nothing shades when the
 * wind is pure zero-mean gust noise).
 */
export function disturbanceWindows(trace: Trace): Array<[number, number]> {
  const t = col(trace, "t");
  const wx = col(trace, "windx");
  const wy = col(trace, "windy");
  const wz = col(trace, "windz");
  const n = trace.rows;
  if (n < 2) return [];
  const dt = t[1] - t[0];
  const half = Math.max(1, Math.round(0.125 / dt));
  const mean = new Float64Array(n);
  let peak = 0;
  for (let i = 0; i < n; i++) {
    let sx = 0, sy = 0, sz = 0, m = 0;
    for (let j = Math.max(0, i - half); j < Math.min(n, i + half + 1); j++) {
      sx += wx[j]; sy += wy[j]; sz += wz[j]; m++;
    }
    mean[i] = Math.hypot(sx / m, sy / m, sz / m);
    peak = Math.max(peak, mean[i]);
  }
  if (peak < 1e-9) return [];
  const threshold = 0.5 * peak;
  const windows: Array<[number, number]> = [];
  let start: number | null = null;
  for (let i = 0; i < n; i++) {
    if (mean[i] >= threshold && start === null) start = t[i];
    if (mean[i] < threshold && start !== null) {
      windows.push([start, t[i]]);
      start = null;
    }
  }
  if (start !== null) windows.push([start, t[n - 1]]);
  return windows;
}
