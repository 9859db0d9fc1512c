/**
 * Condition-number sensitivity figure.
 *
 * One line per kappa_* column against the interface shift delta, on a
 * log y axis. Cells where the matrix was numerically singular carry
 * the sentinel Infinity; those sweep positions get a cross marker
 * pinned to the top of the plot instead of a line point, so a
 * stabilized variant's flat line and an unstabilized variant's
 * blow-ups stay readable in the same frame.
 */

import { Table, DataError, columnsWithPrefix, numericColumn } from "./csv.js";
import { FigureStyle } from "./style.js";
import { Frame, LegendItem, Scene, extent, padDomain } from "./scene.js";

interface Series {
  label: string;
  color: string;
  /** Finite positive (delta, kappa) pairs, in sweep order. */
  points: [number, number][];
  /** Deltas whose kappa is singular. */
  singular: number[];
}

// ---------------------------------------------------------------------------

function collectSeries(tables: Table[], style: FigureStyle): Series[] {
  const series: Series[] = [];
  let colorIdx = 0;
  for (const table of tables) {
    const deltas = numericColumn(table, "delta");
    const kappaCols = columnsWithPrefix(table, "kappa_");
    if (kappaCols.length === 0) {
      throw new DataError(`missing column "kappa_*" in "${table.name}"`);
    }
    for (const col of kappaCols) {
      const ys = numericColumn(table, col);
      const short = col.slice("kappa_".length);
      const s: Series = {
        label: tables.length > 1 ? `${table.name}: ${short}` : short,
        color: style.palette[colorIdx++ % style.palette.length]!,
        points: [],
        singular: [],
      };
      for (let i = 0; i < deltas.length; i++) {
        const x = deltas[i];
        const y = ys[i];
        if (x == null || y == null || Number.isNaN(y)) continue;
        if (y === Infinity) s.singular.push(x);
        else if (y > 0) s.points.push([x, y]);
      }
      series.push(s);
    }
  }
  return series;
}

// ---------------------------------------------------------------------------

export function buildSensitivityFigure(
  tables: Table[],
  style: FigureStyle,
): Scene {
  const series = collectSeries(tables, style);

  const allX = series.flatMap((s) => [...s.points.map((p) => p[0]),
                                      ...s.singular]);
  const xExt = extent(allX);
  if (xExt == null) {
    throw new DataError("no delta values to plot");
  }
  // An all-singular sweep still needs a y axis; fall back to a fixed
  // window so the crosses have somewhere to sit.
  const yExt = extent(series.flatMap((s) => s.points.map((p) => p[1])));
  const yDomain = padDomain(yExt ?? [1, 1e6], "log");

  const frame = new Frame({
    style,
    title: tables.length === 1 ? tables[0]!.name : "sensitivity",
    xLabel: "delta",
    yLabel: "kappa_2(A)",
    xDomain: padDomain(xExt, "linear", 0.04),
    yDomain,
    xScale: "linear",
    yScale: "log",
  });
  frame.drawBase();

  let anySingular = false;
  for (const s of series) {
    if (s.points.length > 0) {
      const pagePts = s.points.map(
        (p) => [frame.xOf(p[0]), frame.yOf(p[1])] as [number, number]);
      frame.add({ kind: "path", points: pagePts, color: s.color,
                  width: style.lineWidth });
    }
    for (const x of s.singular) {
      anySingular = true;
      frame.add({ kind: "marker", x: frame.xOf(x), y: frame.topEdgeY() + 7,
                  shape: "cross", color: s.color, size: style.markerSize + 0.8 });
    }
  }

  const legend: LegendItem[] = series.map((s) => ({
    label: s.label,
    color: s.color,
    swatch: s.points.length > 0 ? "line" : "cross",
  }));
  if (anySingular) {
    legend.push({ label: "singular", color: "#555555", swatch: "cross" });
  }
  frame.drawLegend(legend);
  return frame.scene;
}
