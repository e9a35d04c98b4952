/**
 * Wire protocol shared with the teleop server: length-prefixed text messages
 * `<byte length>:<json>` carrying structured payloads.
 */

export const GRID_ROWS = 25;
export const GRID_COLS = 4;
export const GRID_BYTES = GRID_ROWS * GRID_COLS;

export interface FrameMessage {
  type: "frame";
  t: number;
  grid: string; // base64 of GRID_BYTES gray bytes
  velocity: number;
  front_gap: number;
  status: string;
  reward: number | null;
}

export interface EndMessage {
  type: "end";
  kind: string;
  t: number;
  traveled_m: number;
  total_reward: number;
  warnings: number;
}

export interface CommandMessage {
  type: "cmd";
  a_tilde: number;
}

export type ServerMessage = FrameMessage | EndMessage;

const encoder = new TextEncoder();

export function encodeMessage(payload: object): string {
  const body = JSON.stringify(payload);
  return `${encoder.encode(body).length}:${body}`;
}

export function decodeMessage(text: string): Record<string, unknown> {
  const sep = text.indexOf(":");
  if (sep < 0) {
    throw new Error("missing length prefix");
  }
  const head = text.slice(0, sep);
  const body = text.slice(sep + 1);
  if (Number(head) !== encoder.encode(body).length) {
    throw new Error("length prefix does not match payload");
  }
  const payload: unknown = JSON.parse(body);
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new Error("payload must be a JSON object");
  }
  return payload as Record<string, unknown>;
}

export function encodeCommand(aTilde: number): string {
  if (!(aTilde >= -1 && aTilde <= 1)) {
    throw new Error(`a_tilde outside [-1, 1]: ${aTilde}`);
  }
  const cmd: CommandMessage = { type: "cmd", a_tilde: aTilde };
  return encodeMessage(cmd);
}

/** Parse and validate a server message; throws on malformed input. */
export function parseServerMessage(text: string): ServerMessage {
  const payload = decodeMessage(text);
  if (payload.type === "frame") {
    const frame = payload as unknown as FrameMessage;
    if (
      typeof frame.t !== "number" ||
      typeof frame.grid !== "string" ||
      typeof frame.velocity !== "number" ||
      typeof frame.front_gap !== "number" ||
      typeof frame.status !== "string"
    ) {
      throw new Error("malformed frame");
    }
    if (decodeGrid(frame.grid).length !== GRID_BYTES) {
      throw new Error("frame grid must decode to 100 bytes");
    }
    return frame;
  }
  if (payload.type === "end") {
    return payload as unknown as EndMessage;
  }
  throw new Error(`unexpected message type ${String(payload.type)}`);
}

export function decodeGrid(base64: string): Uint8Array {
  const raw = atob(base64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    bytes[i] = raw.charCodeAt(i);
  }
  return bytes;
}
