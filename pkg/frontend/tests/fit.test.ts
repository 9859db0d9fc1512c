import { describe, expect, it } from "vitest";

import { DataError } from "../src/csv.js";
import { fitPowerLaw } from "../src/fit.js";

const HS = [0.25, 0.125, 0.0625, 0.03125];

describe("fitPowerLaw", () => {
  it("recovers the exponent of exact power-law data", () => {
    for (const p of [0.5, 1, 2, 3.7]) {
      const ys = HS.map((h) => 4.2 * Math.pow(h, p));
      const fit = fitPowerLaw(HS, ys);
      expect(fit.slope).toBeCloseTo(p, 9);
      expect(fit.factor).toBeCloseTo(4.2, 6);
    }
  });

  it("handles negative exponents (growth under refinement)", () => {
    const ys = HS.map((h) => 2 / h);
    expect(fitPowerLaw(HS, ys).slope).toBeCloseTo(-1, 9);
  });

  it("skips null, nonpositive and non-finite points", () => {
    const xs = [0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125];
    const ys = [0.0625, null, 0.00390625, Infinity, NaN, 0];
    // Only (0.25, 0.0625) and (0.0625, 0.00390625) survive: exact slope 2.
    expect(fitPowerLaw(xs, ys).slope).toBeCloseTo(2, 9);
  });

  it("needs at least two usable points", () => {
    expect(() => fitPowerLaw([0.25], [0.1])).toThrow(DataError);
    expect(() => fitPowerLaw([0.25, 0.125], [0.1, null]))
      .toThrow(/>= 2 positive points/);
  });

  it("rejects coincident x values", () => {
    expect(() => fitPowerLaw([0.25, 0.25], [0.1, 0.2]))
      .toThrow(/distinct x values/);
  });
});
