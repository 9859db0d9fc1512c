/**
 * Power-law fit for convergence data.
 *
 * Error curves from a refinement ladder behave like E = C * h^p; the
 * fitted p is what gets annotated next to each series in the legend.
 */

import { DataError } from "./csv.js";

export interface PowerLaw {
  /** Exponent p of E = C * h^p (least squares in log10-log10). */
  slope: number;
  /** Prefactor C. */
  factor: number;
}

/**
 * Fit E = C * x^p through the points with both coordinates finite and
 * positive; other points (singular entries, empty cells) are skipped.
 *
 * @throws DataError when fewer than two usable points remain.
 */
export function fitPowerLaw(
  xs: (number | null)[],
  ys: (number | null)[],
): PowerLaw {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < Math.min(xs.length, ys.length); i++) {
    const x = xs[i];
    const y = ys[i];
    if (x == null || y == null) continue;
    if (!(isFinite(x) && isFinite(y) && x > 0 && y > 0)) continue;
    lx.push(Math.log10(x));
    ly.push(Math.log10(y));
  }
  const n = lx.length;
  if (n < 2) {
    throw new DataError(`power-law fit needs >= 2 positive points, got ${n}`);
  }
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxy = 0;
  let sxx = 0;
  for (let i = 0; i < n; i++) {
    sxy += (lx[i]! - mx) * (ly[i]! - my);
    sxx += (lx[i]! - mx) * (lx[i]! - mx);
  }
  if (sxx === 0) {
    throw new DataError("power-law fit needs at least two distinct x values");
  }
  const slope = sxy / sxx;
  return { slope, factor: Math.pow(10, my - slope * mx) };
}
