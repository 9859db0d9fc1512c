/**
 * Time-trace figure: probe recordings (membrane potential, bulk
 * potentials) against time, one line per column.
 */

import { Table, DataError, numericColumn } from "./csv.js";
import { FigureStyle } from "./style.js";
import { Frame, LegendItem, Scene, extent, padDomain } from "./scene.js";

interface Series {
  label: string;
  color: string;
  points: [number, number][];
}

export function buildTraceFigure(tables: Table[], style: FigureStyle): Scene {
  const series: Series[] = [];
  let colorIdx = 0;
  let xLabel = "t";
  for (const table of tables) {
    const xCol = table.columns.includes("t") ? "t" : table.columns[0];
    if (xCol === undefined) {
      throw new DataError(`missing column "t" in "${table.name}"`);
    }
    xLabel = xCol;
    const xs = numericColumn(table, xCol);
    const yCols = table.columns.filter((c) => c !== xCol);
    if (yCols.length === 0) {
      throw new DataError(`no data columns besides "${xCol}" in "${table.name}"`);
    }
    for (const col of yCols) {
      const ys = numericColumn(table, col);
      const points: [number, number][] = [];
      for (let i = 0; i < xs.length; i++) {
        const x = xs[i];
        const y = ys[i];
        if (x == null || y == null || !isFinite(x) || !isFinite(y)) continue;
        points.push([x, y]);
      }
      if (points.length === 0) continue;
      series.push({
        label: tables.length > 1 ? `${table.name}: ${col}` : col,
        color: style.palette[colorIdx++ % style.palette.length]!,
        points,
      });
    }
  }
  if (series.length === 0) {
    throw new DataError("no numeric trace columns to plot");
  }

  const allPts = series.flatMap((s) => s.points);
  const xExt = extent(allPts.map((p) => p[0]))!;
  const yExt = extent(allPts.map((p) => p[1]))!;

  const frame = new Frame({
    style,
    title: tables.length === 1 ? tables[0]!.name : "trace",
    xLabel,
    yLabel: "value",
    xDomain: padDomain(xExt, "linear", 0.02),
    yDomain: padDomain(yExt, "linear"),
    xScale: "linear",
    yScale: "linear",
  });
  frame.drawBase();

  for (const s of series) {
    frame.add({
      kind: "path",
      points: s.points.map(
        (p) => [frame.xOf(p[0]), frame.yOf(p[1])] as [number, number]),
      color: s.color,
      width: style.lineWidth,
    });
  }

  const legend: LegendItem[] = series.map((s) => ({
    label: s.label,
    color: s.color,
    swatch: "line",
  }));
  frame.drawLegend(legend);
  return frame.scene;
}
