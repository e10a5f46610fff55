import { readFileSync } from "node:fs";

export interface Table {
  header: string[];
  rows: string[][];
  path: string;
}

export class SchemaError extends Error {}

/** Minimal CSV reader for the experiment outputs (no quoting, no embedded commas). */
export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8").trim();
  if (text.length === 0) {
    throw new SchemaError(`${path}: file is empty`);
  }
  const lines = text.split(/\r?\n/);
  const header = lines[0].split(",").map((s) => s.trim());
  const rows = lines.slice(1).map((line) => line.split(",").map((s) => s.trim()));
  return { header, rows, path };
}

/** Assert the table carries every required column, naming the first missing one. */
export function requireColumns(table: Table, columns: string[]): void {
  for (const col of columns) {
    if (!table.header.includes(col)) {
      throw new SchemaError(
        `${table.path}: missing column "${col}" (found: ${table.header.join(", ")})`,
      );
    }
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${table.path}: missing column "${name}"`);
  }
  return table.rows.map((r) => r[idx]);
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((v, i) => {
    const x = Number(v);
    if (!Number.isFinite(x)) {
      throw new SchemaError(`${table.path}: row ${i + 2} has non-numeric ${name}="${v}"`);
    }
    return x;
  });
}
