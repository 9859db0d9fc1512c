/**
 * Figure styling.
 *
 * Everything visual lives here so that a fixed style file pins the
 * output bytes exactly: same CSV + same style = identical image.
 */

import { readFileSync } from "node:fs";

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

export interface FigureStyle {
  /** Page size in points. */
  width: number;
  height: number;
  /** Margins around the plot area, in points. */
  marginLeft: number;
  marginRight: number;
  marginTop: number;
  marginBottom: number;
  /** Core-14 font family understood by the PDF renderer. */
  fontFamily: string;
  titleSize: number;
  labelSize: number;
  tickSize: number;
  legendSize: number;
  /** Series colors, cycled in column order. */
  palette: string[];
  axisColor: string;
  gridColor: string;
  textColor: string;
  lineWidth: number;
  markerSize: number;
}

// ---------------------------------------------------------------------------
// Defaults and overrides
// ---------------------------------------------------------------------------

export const DEFAULT_STYLE: FigureStyle = {
  width: 480,
  height: 340,
  marginLeft: 64,
  marginRight: 16,
  marginTop: 34,
  marginBottom: 46,
  fontFamily: "helvetica",
  titleSize: 11,
  labelSize: 9,
  tickSize: 8,
  legendSize: 8,
  palette: ["#4361ee", "#e63946", "#2d6a4f", "#9d4edd", "#e09f3e", "#333333"],
  axisColor: "#333333",
  gridColor: "#dddddd",
  textColor: "#222222",
  lineWidth: 1.2,
  markerSize: 2.2,
};

/** Overlay a partial style (unknown keys are ignored) onto the defaults. */
export function mergeStyle(partial: Partial<FigureStyle>): FigureStyle {
  const style = { ...DEFAULT_STYLE };
  for (const key of Object.keys(style) as (keyof FigureStyle)[]) {
    const v = partial[key];
    if (v !== undefined) (style as Record<string, unknown>)[key] = v;
  }
  return style;
}

/** Read a JSON style file and merge it over the defaults. */
export function loadStyle(path: string): FigureStyle {
  return mergeStyle(JSON.parse(readFileSync(path, "utf-8")));
}
