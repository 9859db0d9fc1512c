import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";
import { ladderCsv } from "./helpers.js";

let dir: string;
let logs: string[];
let errs: string[];

beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), "plotviz-"));
  logs = [];
  errs = [];
  vi.spyOn(console, "log").mockImplementation((...a) =>
    logs.push(a.join(" ")));
  vi.spyOn(console, "error").mockImplementation((...a) =>
    errs.push(a.join(" ")));
});

afterEach(() => {
  vi.restoreAllMocks();
  rmSync(dir, { recursive: true, force: true });
});

function writeCsv(name: string, text: string): string {
  const path = join(dir, name);
  writeFileSync(path, text);
  return path;
}

describe("plotviz CLI", () => {
  it("renders a convergence figure and reports the output path", () => {
    const csv = writeCsv("conv.csv", ladderCsv([{ name: "u_L2", c: 1, p: 2 }]));
    const out = join(dir, "conv.pdf");
    expect(main(["plot", "convergence", "--in", csv, "--out", out])).toBe(0);
    expect(logs).toEqual([`wrote ${out}`]);
    const bytes = readFileSync(out);
    expect(bytes.subarray(0, 5).toString()).toBe("%PDF-");
    expect(bytes.toString("latin1")).toContain("slope 2.00");
  });

  it("writes byte-identical output on a rerun", () => {
    const csv = writeCsv("conv.csv", ladderCsv([{ name: "u_L2", c: 1, p: 2 }]));
    const out1 = join(dir, "a.pdf");
    const out2 = join(dir, "b.pdf");
    expect(main(["plot", "convergence", "--in", csv, "--out", out1])).toBe(0);
    expect(main(["plot", "convergence", "--in", csv, "--out", out2])).toBe(0);
    expect(readFileSync(out1).equals(readFileSync(out2))).toBe(true);
  });

  it("renders a sensitivity figure with singular entries", () => {
    const csv = writeCsv("sens.csv",
      "m,delta,kappa_none,kappa_s1,kappa_s2\n" +
      "0,0.0,singular,6.9e3,4.4e1\n1,0.01,2.1e7,6.8e3,4.3e1\n" +
      "2,0.02,8.0e6,6.9e3,4.4e1\n");
    const out = join(dir, "sens.pdf");
    expect(main(["plot", "sensitivity", "--in", csv, "--out", out])).toBe(0);
    expect(readFileSync(out).toString("latin1")).toContain("singular");
  });

  it("accepts a style file override", () => {
    const csv = writeCsv("conv.csv", ladderCsv([{ name: "u_L2", c: 1, p: 2 }]));
    const style = join(dir, "style.json");
    writeFileSync(style, JSON.stringify({ width: 600, height: 400 }));
    const out = join(dir, "styled.pdf");
    expect(main(["plot", "convergence", "--in", csv, "--out", out,
                 "--style", style])).toBe(0);
    expect(readFileSync(out).toString("latin1"))
      .toContain("/MediaBox [0 0 600. 400.]");
  });

  it("exits 1 naming the column when one is missing", () => {
    const csv = writeCsv("bad.csv", "M,err_u\n8,0.1\n16,0.05\n");
    const out = join(dir, "bad.pdf");
    expect(main(["plot", "convergence", "--in", csv, "--out", out])).toBe(1);
    expect(errs.join("\n")).toContain('missing column "h"');
  });

  it("exits 1 on an empty CSV", () => {
    const csv = writeCsv("empty.csv", "");
    expect(main(["plot", "convergence", "--in", csv,
                 "--out", join(dir, "x.pdf")])).toBe(1);
    expect(errs.join("\n")).toContain("empty CSV");
  });

  it("exits 1 on an unreadable input file", () => {
    expect(main(["plot", "trace", "--in", join(dir, "nope.csv"),
                 "--out", join(dir, "x.pdf")])).toBe(1);
    expect(errs.join("\n")).toContain("error:");
  });

  it("exits 2 on an unknown plot kind", () => {
    expect(main(["plot", "heatmap", "--in", "a.csv", "--out", "a.pdf"]))
      .toBe(2);
    expect(errs.join("\n")).toContain('unknown plot kind "heatmap"');
  });

  it("exits 2 when inputs or the output are missing", () => {
    expect(main(["plot", "convergence", "--out", "a.pdf"])).toBe(2);
    expect(main(["plot", "convergence", "--in", "a.csv"])).toBe(2);
    expect(main([])).toBe(2);
    expect(errs.join("\n")).toContain("usage:");
  });

  it("exits 2 on a non-PDF output extension", () => {
    expect(main(["plot", "convergence", "--in", "a.csv", "--out", "a.svg"]))
      .toBe(2);
    expect(errs.join("\n")).toContain('unsupported output format ".svg"');
  });
});
