import { describe, expect, it } from "vitest";

import { DataError, columnsWithPrefix, numericColumn, parseTable,
         requireColumns, toNumber } from "../src/csv.js";

describe("parseTable", () => {
  it("parses a header row and keyed data rows", () => {
    const t = parseTable("N,h,err_u_L2\n16,0.25,3.4e-2\n32,0.125,8.6e-3\n");
    expect(t.columns).toEqual(["N", "h", "err_u_L2"]);
    expect(t.rows).toHaveLength(2);
    expect(t.rows[0]).toEqual({ N: "16", h: "0.25", err_u_L2: "3.4e-2" });
  });

  it("carries the given name into error messages", () => {
    const t = parseTable("a,b\n1,2\n", "sweep");
    expect(t.name).toBe("sweep");
    expect(() => requireColumns(t, ["kappa_s1"]))
      .toThrow('missing column "kappa_s1" in "sweep"');
  });

  it("rejects an empty file", () => {
    expect(() => parseTable("")).toThrow(DataError);
    expect(() => parseTable("")).toThrow(/empty CSV/);
  });

  it("rejects a header with no data rows", () => {
    expect(() => parseTable("N,h,err\n")).toThrow(/no data rows/);
  });
});

describe("toNumber", () => {
  it("parses plain and exponent notation", () => {
    expect(toNumber("3")).toBe(3);
    expect(toNumber("-1.5e-3")).toBe(-1.5e-3);
    expect(toNumber(" 2.0 ")).toBe(2);
  });

  it("maps the singular sentinel to Infinity", () => {
    expect(toNumber("singular")).toBe(Infinity);
  });

  it("maps the nan sentinel to NaN", () => {
    expect(toNumber("nan")).toBeNaN();
  });

  it("maps empty and non-numeric cells to null", () => {
    expect(toNumber("")).toBeNull();
    expect(toNumber("   ")).toBeNull();
    expect(toNumber("multi")).toBeNull();
    expect(toNumber(undefined)).toBeNull();
  });
});

describe("column access", () => {
  const t = parseTable(
    "m,delta,kappa_none,kappa_s1\n0,0.0,singular,12.5\n1,0.01,,13.0\n");

  it("lists columns by prefix in header order", () => {
    expect(columnsWithPrefix(t, "kappa_")).toEqual(["kappa_none", "kappa_s1"]);
    expect(columnsWithPrefix(t, "err_")).toEqual([]);
  });

  it("reads a numeric column with sentinels applied", () => {
    expect(numericColumn(t, "kappa_none")).toEqual([Infinity, null]);
    expect(numericColumn(t, "kappa_s1")).toEqual([12.5, 13.0]);
  });

  it("names the missing column", () => {
    expect(() => numericColumn(t, "kappa_s2"))
      .toThrow('missing column "kappa_s2"');
  });
});
