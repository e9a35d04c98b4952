/**
 * Per-step trace recorder exported as CSV, schema-identical to the server's
 * episode-log trace columns.
 */

export const TRACE_COLUMNS = ["t", "vel", "gap", "a_tilde"] as const;

export interface TraceRow {
  t: number;
  vel: number;
  gap: number;
  a_tilde: number;
}

export class TraceRecorder {
  private rows: TraceRow[] = [];

  push(row: TraceRow): void {
    this.rows.push(row);
  }

  get length(): number {
    return this.rows.length;
  }

  toCsv(aborted = false): string {
    const lines = [TRACE_COLUMNS.join(",")];
    for (const row of this.rows) {
      lines.push(TRACE_COLUMNS.map((c) => String(row[c])).join(","));
    }
    if (aborted) {
      lines.push("# aborted");
    }
    return lines.join("\n") + "\n";
  }

  reset(): void {
    this.rows = [];
  }
}
