/**
 * Pure view-model helpers for the BEV grid raster and HUD, kept free of DOM
 * dependencies so they are unit-testable.
 */

import { GRID_BYTES, GRID_COLS, GRID_ROWS } from "./protocol.js";

/** Gray palette used by the simulator's observation encoding. */
export const GRAY_VALUES: ReadonlySet<number> = new Set([90, 160, 220, 30]);

export function grayToCss(value: number): string {
  return `rgb(${value},${value},${value})`;
}

/** Map 100 gray bytes to a 25x4 matrix of CSS colors (row 0 = farthest ahead). */
export function gridToColors(bytes: Uint8Array): string[][] {
  if (bytes.length !== GRID_BYTES) {
    throw new Error(`grid must be ${GRID_BYTES} bytes, got ${bytes.length}`);
  }
  const rows: string[][] = [];
  for (let r = 0; r < GRID_ROWS; r++) {
    const row: string[] = [];
    for (let c = 0; c < GRID_COLS; c++) {
      row.push(grayToCss(bytes[r * GRID_COLS + c]));
    }
    rows.push(row);
  }
  return rows;
}

export interface Hud {
  velocityText: string;
  gapText: string;
  stepText: string;
  banner: string | null; // non-null on terminal frames
}

const TERMINAL_BANNERS: Record<string, string> = {
  finished: "FINISHED — route complete",
  collided: "COLLIDED",
  timeout: "TIMEOUT",
  stalled: "STALLED",
  aborted: "SESSION ABORTED",
};

export function hudFor(velocity: number, frontGap: number, t: number, status: string): Hud {
  return {
    velocityText: `${velocity.toFixed(2)} m/s`,
    gapText: Number.isFinite(frontGap) ? `${frontGap.toFixed(2)} m` : "—",
    stepText: `t=${t}`,
    banner: status in TERMINAL_BANNERS ? TERMINAL_BANNERS[status] : null,
  };
}

/** Drops stale frames: returns true when the frame should be applied. */
export class FrameSequencer {
  private lastT = -1;

  accept(t: number): boolean {
    if (t <= this.lastT) {
      return false;
    }
    this.lastT = t;
    return true;
  }

  reset(): void {
    this.lastT = -1;
  }
}
