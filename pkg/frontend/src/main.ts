/**
 * Entry point: connects to the teleop WebSocket, renders frames onto the
 * canvas, streams keyboard commands at a fixed rate and offers the finished
 * trace as a CSV download.
 */

import { ControlState, KeyState } from "./control.js";
import {
  FrameMessage,
  decodeGrid,
  encodeCommand,
  parseServerMessage,
  GRID_COLS,
  GRID_ROWS,
} from "./protocol.js";
import { FrameSequencer, gridToColors, hudFor } from "./render.js";
import { TraceRecorder } from "./trace.js";

const COMMAND_HZ = 20;
const CELL_W = 48;
const CELL_H = 18;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

function start(): void {
  const canvas = byId<HTMLCanvasElement>("grid");
  canvas.width = GRID_COLS * CELL_W;
  canvas.height = GRID_ROWS * CELL_H;
  const maybeCtx = canvas.getContext("2d");
  if (!maybeCtx) throw new Error("canvas 2d context unavailable");
  const ctx: CanvasRenderingContext2D = maybeCtx;

  const velocityEl = byId<HTMLSpanElement>("velocity");
  const gapEl = byId<HTMLSpanElement>("gap");
  const stepEl = byId<HTMLSpanElement>("step");
  const actionEl = byId<HTMLSpanElement>("action");
  const bannerEl = byId<HTMLDivElement>("banner");
  const errorsEl = byId<HTMLSpanElement>("errors");
  const downloadEl = byId<HTMLAnchorElement>("download");
  const reconnectEl = byId<HTMLButtonElement>("reconnect");

  const control = new ControlState();
  const keys: KeyState = { accelerate: false, brake: false };
  const sequencer = new FrameSequencer();
  const trace = new TraceRecorder();
  let lastFrame: FrameMessage | null = null;
  let errorCount = 0;
  let terminal = false;
  let socket: WebSocket | null = null;
  let commandTimer: number | null = null;
  let lastTick = performance.now();

  function drawFrame(frame: FrameMessage): void {
    const colors = gridToColors(decodeGrid(frame.grid));
    for (let r = 0; r < GRID_ROWS; r++) {
      for (let c = 0; c < GRID_COLS; c++) {
        ctx.fillStyle = colors[r][c];
        ctx.fillRect(c * CELL_W, r * CELL_H, CELL_W - 1, CELL_H - 1);
      }
    }
    const hud = hudFor(frame.velocity, frame.front_gap, frame.t, frame.status);
    velocityEl.textContent = hud.velocityText;
    gapEl.textContent = hud.gapText;
    stepEl.textContent = hud.stepText;
    if (hud.banner) {
      showBanner(hud.banner, frame.status);
    }
  }

  function showBanner(text: string, kind: string): void {
    terminal = true;
    bannerEl.textContent = text;
    bannerEl.className = kind === "finished" ? "banner ok" : "banner bad";
    bannerEl.hidden = false;
    offerDownload(kind === "aborted");
  }

  function offerDownload(aborted: boolean): void {
    const blob = new Blob([trace.toCsv(aborted)], { type: "text/csv" });
    downloadEl.href = URL.createObjectURL(blob);
    downloadEl.download = "teleop_trace.csv";
    downloadEl.hidden = false;
  }

  function tick(): void {
    const now = performance.now();
    const dt = (now - lastTick) / 1000;
    lastTick = now;
    if (terminal || !socket || socket.readyState !== WebSocket.OPEN) {
      return;
    }
    const aTilde = control.update(keys, dt);
    actionEl.textContent = aTilde.toFixed(2);
    socket.send(encodeCommand(aTilde));
  }

  function connect(): void {
    terminal = false;
    errorCount = 0;
    control.reset();
    sequencer.reset();
    trace.reset();
    bannerEl.hidden = true;
    downloadEl.hidden = true;
    reconnectEl.hidden = true;

    socket = new WebSocket(wsUrl());
    socket.onmessage = (event) => {
      let message;
      try {
        message = parseServerMessage(String(event.data));
      } catch {
        errorCount += 1;
        errorsEl.textContent = String(errorCount);
        return;
      }
      if (message.type === "frame") {
        if (!sequencer.accept(message.t)) {
          return; // stale frame
        }
        if (lastFrame && message.reward !== null) {
          trace.push({
            t: message.t,
            vel: message.velocity,
            gap: message.front_gap,
            a_tilde: control.aTilde,
          });
        }
        lastFrame = message;
        drawFrame(message);
      } else {
        showBanner(
          `${message.kind.toUpperCase()} — ${message.traveled_m.toFixed(1)} m, ` +
            `reward ${message.total_reward.toFixed(1)}`,
          message.kind,
        );
      }
    };
    socket.onclose = () => {
      if (!terminal) {
        showBanner("SESSION ABORTED", "aborted");
      }
      reconnectEl.hidden = false;
    };
    lastTick = performance.now();
    if (commandTimer !== null) {
      clearInterval(commandTimer);
    }
    commandTimer = setInterval(tick, 1000 / COMMAND_HZ) as unknown as number;
  }

  window.addEventListener("keydown", (event) => {
    if (event.key === "ArrowUp" || event.key === "w") keys.accelerate = true;
    if (event.key === "ArrowDown" || event.key === "s") keys.brake = true;
  });
  window.addEventListener("keyup", (event) => {
    if (event.key === "ArrowUp" || event.key === "w") keys.accelerate = false;
    if (event.key === "ArrowDown" || event.key === "s") keys.brake = false;
  });
  reconnectEl.addEventListener("click", connect);

  connect();
}

window.addEventListener("DOMContentLoaded", start);
