/**
 * Minimal CSV reader for the harness output files.
 *
 * Lines starting with '#' are configuration comments and are skipped. Values
 * are plain (the harness never quotes; params fields use ';' separators), but
 * double-quoted fields are tolerated for robustness.
 */

export interface CsvTable {
  header: string[];
  rows: Record<string, string>[];
}

function splitLine(line: string): string[] {
  const out: string[] = [];
  let cur = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          cur += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      out.push(cur);
      cur = "";
    } else {
      cur += ch;
    }
  }
  out.push(cur);
  return out;
}

export function parseCsv(text: string): CsvTable {
  const lines = text
    .split(/\r?\n/)
    .filter((l) => l.trim().length > 0 && !l.startsWith("#"));
  if (lines.length === 0) {
    throw new Error("CSV has no content rows");
  }
  const header = splitLine(lines[0]);
  const rows = lines.slice(1).map((line, idx) => {
    const fields = splitLine(line);
    if (fields.length !== header.length) {
      throw new Error(
        `CSV row ${idx + 2} has ${fields.length} fields, expected ${header.length}`,
      );
    }
    const row: Record<string, string> = {};
    header.forEach((name, i) => (row[name] = fields[i]));
    return row;
  });
  return { header, rows };
}

export function requireColumns(table: CsvTable, names: string[]): void {
  for (const name of names) {
    if (!table.header.includes(name)) {
      throw new Error(`CSV is missing required column '${name}'`);
    }
  }
}

export function num(row: Record<string, string>, column: string): number {
  const text = row[column];
  const value = Number(text);
  if (text.trim() === "" || !Number.isFinite(value)) {
    throw new Error(`non-numeric value '${text}' in column '${column}'`);
  }
  return value;
}
