#!/usr/bin/env node
/**
 * plotviz - figures from the solver CLI's CSV artifacts.
 *
 * Usage:
 *   plotviz plot convergence --in conv_multi.csv --out conv.pdf
 *   plotviz plot sensitivity --in sens_ode.csv --out sens.pdf [--style style.json]
 *   plotviz plot trace --in hh_trace.csv --out trace.pdf
 *
 * Exit codes: 0 success, 1 bad data (missing column, empty CSV,
 * unreadable file), 2 usage error.
 */

import { parseArgs } from "node:util";
import { readFileSync, realpathSync, writeFileSync } from "node:fs";
import { basename, extname } from "node:path";
import { pathToFileURL } from "node:url";

import { Table, DataError, parseTable } from "./csv.js";
import { FigureStyle, DEFAULT_STYLE, loadStyle } from "./style.js";
import { Scene } from "./scene.js";
import { buildConvergenceFigure } from "./convergence.js";
import { buildSensitivityFigure } from "./sensitivity.js";
import { buildTraceFigure } from "./trace.js";
import { renderPdf } from "./pdf.js";

const USAGE =
  "usage: plotviz plot {convergence|sensitivity|trace} " +
  "--in CSV [--in CSV ...] --out IMG [--style FILE]";

const BUILDERS: Record<string, (t: Table[], s: FigureStyle) => Scene> = {
  convergence: buildConvergenceFigure,
  sensitivity: buildSensitivityFigure,
  trace: buildTraceFigure,
};

// ---------------------------------------------------------------------------

export function main(argv: string[]): number {
  if (argv[0] !== "plot") {
    console.error(USAGE);
    return 2;
  }
  const kind = argv[1] ?? "";
  const build = BUILDERS[kind];
  if (build === undefined) {
    console.error(`unknown plot kind "${kind}"`);
    console.error(USAGE);
    return 2;
  }

  let opts: { in?: string[]; out?: string; style?: string };
  try {
    opts = parseArgs({
      args: argv.slice(2),
      options: {
        in: { type: "string", multiple: true },
        out: { type: "string" },
        style: { type: "string" },
      },
    }).values;
  } catch (e) {
    console.error((e as Error).message);
    console.error(USAGE);
    return 2;
  }
  const inputs = opts.in ?? [];
  const out = opts.out;
  if (inputs.length === 0 || out === undefined) {
    console.error(USAGE);
    return 2;
  }
  if (extname(out).toLowerCase() !== ".pdf") {
    console.error(`unsupported output format "${extname(out)}" (use .pdf)`);
    return 2;
  }

  try {
    const style = opts.style !== undefined ? loadStyle(opts.style)
                                           : DEFAULT_STYLE;
    const tables = inputs.map((path) =>
      parseTable(readFileSync(path, "utf-8"), basename(path, ".csv")));
    const scene = build(tables, style);
    writeFileSync(out, renderPdf(scene, style));
    console.log(`wrote ${out}`);
    return 0;
  } catch (e) {
    if (e instanceof DataError || (e as NodeJS.ErrnoException).code) {
      console.error(`error: ${(e as Error).message}`);
      return 1;
    }
    throw e;
  }
}

// ---------------------------------------------------------------------------

const argvPath = process.argv[1];
if (argvPath !== undefined &&
    import.meta.url === pathToFileURL(realpathSync(argvPath)).href) {
  process.exit(main(process.argv.slice(2)));
}
