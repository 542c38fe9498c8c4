import Papa from "papaparse";

/** A parsed CSV with its schema tag from the `# schema=` header line. */
export interface Table {
  path: string;
  schema: string;
  columns: string[];
  rows: Record<string, string>[];
}

export class SchemaError extends Error {}

const SCHEMA_RE = /^# schema=(\S+)\s*$/;

export function parseCsv(text: string, path: string): Table {
  const firstBreak = text.indexOf("\n");
  const firstLine = firstBreak < 0 ? text : text.slice(0, firstBreak);
  const m = SCHEMA_RE.exec(firstLine);
  if (!m) {
    throw new SchemaError(`${path}: missing "# schema=<name>/<version>" header line`);
  }
  const schema = m[1];

  const body = firstBreak < 0 ? "" : text.slice(firstBreak + 1);
  const parsed = Papa.parse<Record<string, string>>(body, {
    header: true,
    skipEmptyLines: true,
  });
  const fatal = parsed.errors.filter((e) => e.type !== "FieldMismatch");
  if (fatal.length > 0) {
    throw new SchemaError(`${path}: ${fatal[0].message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0) {
    throw new SchemaError(`${path}: no header row`);
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return { path, schema, columns, rows: parsed.data };
}

export function requireSchema(table: Table, expected: string): void {
  if (table.schema !== expected) {
    throw new SchemaError(
      `${table.path}: schema mismatch: expected ${expected}, found ${table.schema}`
    );
  }
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`${table.path}: missing column ${name}`);
    }
  }
}

export function num(row: Record<string, string>, col: string): number {
  return Number(row[col]);
}

/** Count the contiguous lambda_1, lambda_2, ... columns of a lyap table. */
export function lambdaCount(table: Table): number {
  let d = 0;
  while (table.columns.includes(`lambda_${d + 1}`)) d++;
  return d;
}
