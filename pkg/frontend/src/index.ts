/**
 * plotviz - turn the solver's CSV artifacts into publication figures.
 */

export { DataError, parseTable, toNumber, requireColumns, columnsWithPrefix,
         numericColumn } from "./csv.js";
export type { Table } from "./csv.js";
export { fitPowerLaw } from "./fit.js";
export type { PowerLaw } from "./fit.js";
export { DEFAULT_STYLE, mergeStyle, loadStyle } from "./style.js";
export type { FigureStyle } from "./style.js";
export { Frame, niceTicks, logTicks, fmtTick, fmtLog, extent,
         padDomain } from "./scene.js";
export type { Scene, Primitive, Scale, LegendItem, FrameOpts } from "./scene.js";
export { buildConvergenceFigure } from "./convergence.js";
export { buildSensitivityFigure } from "./sensitivity.js";
export { buildTraceFigure } from "./trace.js";
export { renderPdf } from "./pdf.js";
export { main } from "./cli.js";
