/**
 * Log-log convergence figure.
 *
 * One line per err_* column against the mesh size h (taken from the
 * CSV's h column, or 1/N when only N is present), with the fitted
 * power-law slope annotated in the legend and reference rate triangles
 * for orders 1 and 2 drawn under the data.
 */

import { Table, DataError, columnsWithPrefix, numericColumn } from "./csv.js";
import { fitPowerLaw } from "./fit.js";
import { FigureStyle } from "./style.js";
import { Frame, LegendItem, Scene, extent, padDomain } from "./scene.js";

interface Series {
  label: string;
  color: string;
  points: [number, number][];
  slope: number;
}

// ---------------------------------------------------------------------------

/** Mesh sizes for one table: its h column, or 1/N as a fallback. */
function meshSizes(table: Table): (number | null)[] {
  if (table.columns.includes("h")) return numericColumn(table, "h");
  if (table.columns.includes("N")) {
    return numericColumn(table, "N").map((n) =>
      n != null && n > 0 ? 1 / n : null);
  }
  throw new DataError(`missing column "h" (or "N") in "${table.name}"`);
}

function collectSeries(tables: Table[], style: FigureStyle): Series[] {
  const series: Series[] = [];
  let colorIdx = 0;
  for (const table of tables) {
    const hs = meshSizes(table);
    const errCols = columnsWithPrefix(table, "err_");
    if (errCols.length === 0) {
      throw new DataError(`missing column "err_*" in "${table.name}"`);
    }
    for (const col of errCols) {
      const ys = numericColumn(table, col);
      const points: [number, number][] = [];
      for (let i = 0; i < hs.length; i++) {
        const x = hs[i];
        const y = ys[i];
        if (x == null || y == null) continue;
        if (!(isFinite(x) && isFinite(y) && x > 0 && y > 0)) continue;
        points.push([x, y]);
      }
      points.sort((a, b) => a[0] - b[0]);
      const short = col.slice("err_".length);
      series.push({
        label: tables.length > 1 ? `${table.name}: ${short}` : short,
        color: style.palette[colorIdx++ % style.palette.length]!,
        points,
        slope: fitPowerLaw(hs, ys).slope,
      });
    }
  }
  return series;
}

// ---------------------------------------------------------------------------

export function buildConvergenceFigure(
  tables: Table[],
  style: FigureStyle,
): Scene {
  const series = collectSeries(tables, style);
  const allPts = series.flatMap((s) => s.points);
  const xExt = extent(allPts.map((p) => p[0]));
  const yExt = extent(allPts.map((p) => p[1]));
  if (xExt == null || yExt == null) {
    throw new DataError("no positive error values to plot on log axes");
  }
  const xDomain = padDomain(xExt, "log");
  const yDomain = padDomain([yExt[0] / 1.6, yExt[1]], "log");

  const frame = new Frame({
    style,
    title: tables.length === 1 ? tables[0]!.name : "convergence",
    xLabel: "h",
    yLabel: "error",
    xDomain,
    yDomain,
    xScale: "log",
    yScale: "log",
  });
  frame.drawBase();

  // Rate triangles for orders 1 and 2, tucked under the right end of
  // the data where a refinement ladder leaves empty space.
  const xb = xExt[1];
  const xa = Math.max(xExt[0], xb / 2);
  if (xa < xb) {
    const r = xb / xa;
    const y0 = yDomain[0] * 1.35;
    for (const p of [1, 2]) {
      frame.add({
        kind: "polygon",
        points: [
          [frame.xOf(xa), frame.yOf(y0)],
          [frame.xOf(xb), frame.yOf(y0)],
          [frame.xOf(xb), frame.yOf(y0 * Math.pow(r, p))],
        ],
        color: "#888888",
        width: 0.8,
      });
      frame.add({
        kind: "text",
        x: frame.xOf(xb) + 3,
        y: frame.yOf(y0 * Math.pow(r, p - 0.5)) + 2.5,
        text: String(p),
        size: style.tickSize,
        color: "#888888",
        align: "left",
      });
    }
  }

  for (const s of series) {
    const pagePts = s.points.map(
      (p) => [frame.xOf(p[0]), frame.yOf(p[1])] as [number, number]);
    frame.add({ kind: "path", points: pagePts, color: s.color,
                width: style.lineWidth });
    for (const [x, y] of pagePts) {
      frame.add({ kind: "marker", x, y, shape: "dot", color: s.color,
                  size: style.markerSize });
    }
  }

  const legend: LegendItem[] = series.map((s) => ({
    label: `${s.label} (slope ${s.slope.toFixed(2)})`,
    color: s.color,
    swatch: "line",
  }));
  frame.drawLegend(legend);
  return frame.scene;
}
