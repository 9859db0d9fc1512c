/**
 * CSV loading for the figure tool.
 *
 * The solver CLI writes plain comma-separated tables with a header row.
 * Numeric cells use repr-style floats; two sentinel strings appear in
 * condition-number columns: "singular" (the solve failed outright) and
 * "nan". Empty cells mark values that do not exist (e.g. the first EOC
 * of a refinement ladder).
 */

import Papa from "papaparse";

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/** A parsed CSV: header names plus string-valued rows keyed by column. */
export interface Table {
  name: string;
  columns: string[];
  rows: Record<string, string>[];
}

/** Bad or missing data in an input table. Maps to exit code 1 in the CLI. */
export class DataError extends Error {}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/**
 * Parse CSV text into a Table.
 *
 * @param text - raw file contents.
 * @param name - label used in legends and error messages (file stem).
 * @throws DataError if the text has no header or no data rows.
 */
export function parseTable(text: string, name = "csv"): Table {
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0 || columns.every((c) => c === "")) {
    throw new DataError(`empty CSV "${name}": no header row`);
  }
  if (parsed.data.length === 0) {
    throw new DataError(`empty CSV "${name}": no data rows`);
  }
  return { name, columns, rows: parsed.data };
}

// ---------------------------------------------------------------------------
// Cell coercion and column access
// ---------------------------------------------------------------------------

/**
 * Coerce one cell to a number.
 *
 * "singular" becomes Infinity (so it sorts above every finite kappa),
 * "nan" becomes NaN, and empty or non-numeric text becomes null.
 */
export function toNumber(cell: string | undefined): number | null {
  if (cell === undefined) return null;
  const s = cell.trim();
  if (s === "") return null;
  if (s === "singular") return Infinity;
  if (s === "nan") return NaN;
  const v = Number(s);
  return Number.isNaN(v) ? null : v;
}

/** Throw a DataError naming the first column that is absent from the table. */
export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new DataError(`missing column "${name}" in "${table.name}"`);
    }
  }
}

/** All column names starting with the given prefix, in header order. */
export function columnsWithPrefix(table: Table, prefix: string): string[] {
  return table.columns.filter((c) => c.startsWith(prefix));
}

/** One column as numbers (null where the cell is empty or non-numeric). */
export function numericColumn(table: Table, name: string): (number | null)[] {
  requireColumns(table, [name]);
  return table.rows.map((r) => toNumber(r[name]));
}
