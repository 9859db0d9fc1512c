/**
 * Scene model: a figure as a flat list of drawing primitives.
 *
 * Builders (convergence, sensitivity, trace) emit scenes; the PDF
 * renderer walks them. Keeping layout in plain data means tests can
 * assert on legend text and marker placement without decoding images.
 *
 * Coordinates are in points with the origin at the top-left corner and
 * y growing downward, matching the renderer's page space.
 */

import { FigureStyle } from "./style.js";

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

export type Scale = "linear" | "log";

export type Primitive =
  | { kind: "rect"; x: number; y: number; w: number; h: number; fill: string }
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number;
      color: string; width: number; dash?: number[] }
  | { kind: "path"; points: [number, number][]; color: string; width: number;
      dash?: number[] }
  | { kind: "polygon"; points: [number, number][]; color: string;
      width: number; fill?: string }
  | { kind: "marker"; x: number; y: number; shape: "dot" | "cross";
      color: string; size: number }
  | { kind: "text"; x: number; y: number; text: string; size: number;
      color: string; align: "left" | "center" | "right"; angle?: number;
      bold?: boolean };

export interface Scene {
  width: number;
  height: number;
  primitives: Primitive[];
}

export interface LegendItem {
  label: string;
  color: string;
  swatch: "line" | "dash" | "dot" | "cross";
}

// ---------------------------------------------------------------------------
// Ticks
// ---------------------------------------------------------------------------

/** Round linear ticks at a 1/2/5 step covering [min, max]. */
export function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const nice = [1, 2, 5, 10].map((m) => m * mag);
  const step = nice.find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 0.01; v += step) ticks.push(v);
  return ticks;
}

/**
 * Ticks for a log axis: decades, densified with the 2 and 5 mantissas
 * when the domain spans fewer than two decades.
 */
export function logTicks(min: number, max: number): number[] {
  const lo = Math.log10(min);
  const hi = Math.log10(max);
  const mantissas = hi - lo < 2 ? [1, 2, 5] : [1];
  const ticks: number[] = [];
  for (let e = Math.floor(lo) - 1; e <= Math.ceil(hi); e++) {
    for (const m of mantissas) {
      const v = m * Math.pow(10, e);
      if (v >= min * 0.999 && v <= max * 1.001) ticks.push(v);
    }
  }
  return ticks;
}

/** Compact tick label: integers plain, everything else trimmed. */
export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return fmtLog(v);
  if (Number.isInteger(v)) return String(v);
  return String(parseFloat(v.toPrecision(3)));
}

/** Mantissa-exponent label for log axes: 1e-2, 2e-2, 5e-2, ... */
export function fmtLog(v: number): string {
  const e = Math.floor(Math.log10(Math.abs(v)) + 1e-9);
  const m = v / Math.pow(10, e);
  const ms = parseFloat(m.toPrecision(2));
  return ms === 1 ? `1e${e}` : `${ms}e${e}`;
}

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/** [min, max] over the finite entries; null when none exist. */
export function extent(values: (number | null)[]): [number, number] | null {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v == null || !isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return lo <= hi ? [lo, hi] : null;
}

/** Pad a domain by a fraction of its span (in log space for log scales). */
export function padDomain(
  domain: [number, number],
  scale: Scale,
  frac = 0.06,
): [number, number] {
  let [lo, hi] = domain;
  if (scale === "log") {
    const span = Math.log10(hi / lo) || 1;
    return [
      Math.pow(10, Math.log10(lo) - frac * span),
      Math.pow(10, Math.log10(hi) + frac * span),
    ];
  }
  const span = hi - lo || Math.abs(hi) || 1;
  return [lo - frac * span, hi + frac * span];
}

// ---------------------------------------------------------------------------
// Frame: plot box, axes, legend
// ---------------------------------------------------------------------------

export interface FrameOpts {
  style: FigureStyle;
  title: string;
  xLabel: string;
  yLabel: string;
  xDomain: [number, number];
  yDomain: [number, number];
  xScale: Scale;
  yScale: Scale;
}

/**
 * An axes frame. Construction computes the data-to-page transform;
 * drawBase() emits background, grid, axes and labels, and the figure
 * builders then add series primitives via add().
 */
export class Frame {
  readonly scene: Scene;
  readonly opts: FrameOpts;
  private readonly px0: number;
  private readonly px1: number;
  private readonly py0: number;
  private readonly py1: number;

  constructor(opts: FrameOpts) {
    const st = opts.style;
    this.opts = opts;
    this.scene = { width: st.width, height: st.height, primitives: [] };
    this.px0 = st.marginLeft;
    this.px1 = st.width - st.marginRight;
    this.py0 = st.marginTop;
    this.py1 = st.height - st.marginBottom;
  }

  add(p: Primitive): void {
    this.scene.primitives.push(p);
  }

  xOf(v: number): number {
    const [lo, hi] = this.opts.xDomain;
    const t = this.opts.xScale === "log"
      ? (Math.log10(v) - Math.log10(lo)) / (Math.log10(hi) - Math.log10(lo) || 1)
      : (v - lo) / (hi - lo || 1);
    return this.px0 + t * (this.px1 - this.px0);
  }

  yOf(v: number): number {
    const [lo, hi] = this.opts.yDomain;
    const t = this.opts.yScale === "log"
      ? (Math.log10(v) - Math.log10(lo)) / (Math.log10(hi) - Math.log10(lo) || 1)
      : (v - lo) / (hi - lo || 1);
    return this.py1 - t * (this.py1 - this.py0);
  }

  /** Page y of the top edge of the plot box. */
  topEdgeY(): number {
    return this.py0;
  }

  drawBase(): void {
    const st = this.opts.style;
    this.add({ kind: "rect", x: 0, y: 0, w: st.width, h: st.height,
               fill: "#ffffff" });
    this.add({ kind: "text", x: this.px0, y: this.py0 - 12,
               text: this.opts.title, size: st.titleSize, color: st.textColor,
               align: "left", bold: true });

    const xTicks = this.ticksFor("x");
    const yTicks = this.ticksFor("y");

    // Grid under everything else.
    for (const v of xTicks) {
      const x = this.xOf(v);
      this.add({ kind: "line", x1: x, y1: this.py0, x2: x, y2: this.py1,
                 color: st.gridColor, width: 0.5 });
    }
    for (const v of yTicks) {
      const y = this.yOf(v);
      this.add({ kind: "line", x1: this.px0, y1: y, x2: this.px1, y2: y,
                 color: st.gridColor, width: 0.5 });
    }

    // Axes.
    this.add({ kind: "line", x1: this.px0, y1: this.py0, x2: this.px0,
               y2: this.py1, color: st.axisColor, width: 0.8 });
    this.add({ kind: "line", x1: this.px0, y1: this.py1, x2: this.px1,
               y2: this.py1, color: st.axisColor, width: 0.8 });

    // Ticks and tick labels.
    const fmt = (v: number, scale: Scale) =>
      scale === "log" ? fmtLog(v) : fmtTick(v);
    for (const v of xTicks) {
      const x = this.xOf(v);
      this.add({ kind: "line", x1: x, y1: this.py1, x2: x, y2: this.py1 + 3,
                 color: st.axisColor, width: 0.5 });
      this.add({ kind: "text", x, y: this.py1 + 11,
                 text: fmt(v, this.opts.xScale), size: st.tickSize,
                 color: st.textColor, align: "center" });
    }
    for (const v of yTicks) {
      const y = this.yOf(v);
      this.add({ kind: "line", x1: this.px0 - 3, y1: y, x2: this.px0, y2: y,
                 color: st.axisColor, width: 0.5 });
      this.add({ kind: "text", x: this.px0 - 5, y: y + 2.5,
                 text: fmt(v, this.opts.yScale), size: st.tickSize,
                 color: st.textColor, align: "right" });
    }

    // Axis labels.
    this.add({ kind: "text", x: (this.px0 + this.px1) / 2,
               y: this.py1 + 26, text: this.opts.xLabel, size: st.labelSize,
               color: st.textColor, align: "center" });
    this.add({ kind: "text", x: 14, y: (this.py0 + this.py1) / 2,
               text: this.opts.yLabel, size: st.labelSize,
               color: st.textColor, align: "center", angle: 90 });
  }

  /** Legend box in the top-right corner of the plot area. */
  drawLegend(items: LegendItem[]): void {
    if (items.length === 0) return;
    const st = this.opts.style;
    const rowH = st.legendSize + 4;
    const textW = Math.max(...items.map((it) => it.label.length));
    const boxW = textW * st.legendSize * 0.52 + 26;
    const boxH = items.length * rowH + 6;
    const bx = this.px1 - boxW - 6;
    const by = this.py0 + 6;
    this.add({ kind: "rect", x: bx, y: by, w: boxW, h: boxH,
               fill: "#ffffff" });
    items.forEach((it, i) => {
      const cy = by + 6 + i * rowH + st.legendSize / 2;
      const sx = bx + 5;
      if (it.swatch === "dot") {
        this.add({ kind: "marker", x: sx + 7, y: cy, shape: "dot",
                   color: it.color, size: st.markerSize });
      } else if (it.swatch === "cross") {
        this.add({ kind: "marker", x: sx + 7, y: cy, shape: "cross",
                   color: it.color, size: st.markerSize + 0.8 });
      } else {
        this.add({ kind: "line", x1: sx, y1: cy, x2: sx + 14, y2: cy,
                   color: it.color, width: st.lineWidth,
                   dash: it.swatch === "dash" ? [3, 2] : undefined });
      }
      this.add({ kind: "text", x: sx + 18, y: cy + st.legendSize * 0.36,
                 text: it.label, size: st.legendSize, color: st.textColor,
                 align: "left" });
    });
  }

  private ticksFor(axis: "x" | "y"): number[] {
    const scale = axis === "x" ? this.opts.xScale : this.opts.yScale;
    const [lo, hi] = axis === "x" ? this.opts.xDomain : this.opts.yDomain;
    return scale === "log" ? logTicks(lo, hi) : niceTicks(lo, hi, 5);
  }
}
