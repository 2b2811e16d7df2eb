/** render <kind> <inputs...> -o out.(svg|png)
 *
 * Kinds: position_keeping TRACE.csv | endpoint_xz TRACE.csv | table1 REPORT.json
 * Exit codes: 0 ok, 2 input/schema error.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { MetricsReport, parseReport, renderEndpointXz,
         renderPositionKeeping, renderTable } from "./figures.js";
import { SchemaError, loadTrace } from "./trace.js";

const KINDS = ["position_keeping", "endpoint_xz", "table1"] as const;
type Kind = (typeof KINDS)[number];

function usage(): string {
  return "usage: render <position_keeping|endpoint_xz|table1> <input> -o out.(svg|png)";
}

async function writeImage(svg: string, outPath: string): Promise<void> {
  if (outPath.endsWith(".png")) {
    const { Resvg } = await import("@resvg/resvg-js");
    writeFileSync(outPath, new Resvg(svg).render().asPng());
  } else {
    writeFileSync(outPath, svg);
  }
}

export async function main(argv: string[]): Promise<number> {
  const args = [...argv];
  let out = "";
  const oi = args.indexOf("-o");
  if (oi >= 0) {
    out = args[oi + 1] ?? "";
    args.splice(oi, 2);
  }
  const [kind, ...inputs] = args;
  if (!kind || !out || inputs.length === 0) {
    console.error(usage());
    return 2;
  }
  if (!(KINDS as readonly string[]).includes(kind)) {
    console.error(`unknown figure kind '${kind}'; expected one of ${KINDS.join(", ")}`);
    return 2;
  }
  try {
    let svg: string;
    if (kind === "table1") {
      const report: MetricsReport = parseReport(readFileSync(inputs[0], "utf8"));
      svg = renderTable(report);
    } else {
      const trace = loadTrace(inputs[0]);
      svg = kind === "position_keeping" ? renderPositionKeeping(trace)
                                        : renderEndpointXz(trace);
    }
    await writeImage(svg, out);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    if (err instanceof Error && "code" in err && err.code === "ENOENT") {
      console.error(`input not found: ${(err as NodeJS.ErrnoException).path}`);
      return 2;
    }
    throw err;
  }
  console.log(`wrote ${out}`);
  return 0;
}

if (process.argv[1]?.endsWith("cli.js")) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
