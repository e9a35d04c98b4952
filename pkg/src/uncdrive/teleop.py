"""Real-time teleoperation service: drives one world per session at the
simulation rate and speaks a length-prefixed JSON message protocol over a
WebSocket channel.  Human episodes are persisted in the standard episode-log
schema and are replayable like agent episodes."""

from __future__ import annotations

import asyncio
import base64
import itertools
import json
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .env import DrivingEnv
from .episode_log import EpisodeRecord, make_header, write_log
from .observation import scenario as scenario_by_id
from .reward import RewardParams
from .sim_core import WorldConfig, front_gap

PROTOCOL_VERSION = 1

# Per-step trace export schema, shared with the browser UI's CSV download.
TRACE_COLUMNS = ("t", "vel", "gap", "a_tilde")


def trace_csv(record: "EpisodeRecord") -> str:
    """Render an episode log as the per-step trace CSV the UI also exports."""
    lines = [",".join(TRACE_COLUMNS)]
    for step in record.steps:
        lines.append(",".join(repr(step[c]) for c in TRACE_COLUMNS))
    if record.end.get("kind") == "aborted":
        lines.append("# aborted")
    return "\n".join(lines) + "\n"

# Minimal page shown when the TypeScript UI has not been built; the primary
# component is fully functional without it.
_FALLBACK_PAGE = """<!doctype html>
<html><head><title>uncdrive teleop</title></head>
<body><h1>uncdrive teleop server</h1>
<p>The browser UI is not built. Build it with:</p>
<pre>cd frontend &amp;&amp; npm install &amp;&amp; npm run build</pre>
<p>The WebSocket endpoint is live at <code>/ws</code>.</p>
</body></html>"""


def encode_message(payload: dict) -> str:
    """Length-prefixed text message: '<byte length>:<json>'."""
    body = json.dumps(payload, separators=(",", ":"))
    return f"{len(body.encode())}:{body}"


def decode_message(text: str) -> dict:
    head, sep, body = text.partition(":")
    if not sep:
        raise ValueError("missing length prefix")
    if int(head) != len(body.encode()):
        raise ValueError("length prefix does not match payload")
    payload = json.loads(body)
    if not isinstance(payload, dict):
        raise ValueError("payload must be a JSON object")
    return payload


def default_frontend_dir() -> Path:
    return Path(__file__).resolve().parents[2] / "frontend" / "dist"


class _CommandHolder:
    """Latest-wins command store fed by the socket reader task."""

    def __init__(self):
        self.a_tilde = 0.0
        self.warnings = 0
        self.closed = False

    def feed(self, text: str) -> None:
        try:
            payload = decode_message(text)
            if payload.get("type") != "cmd":
                raise ValueError(f"unexpected message type {payload.get('type')!r}")
            value = float(payload["a_tilde"])
            if not (-1.0 <= value <= 1.0):
                raise ValueError("a_tilde outside [-1, 1]")
            self.a_tilde = value
        except (ValueError, KeyError, TypeError):
            self.warnings += 1


def _frame_payload(env: DrivingEnv, obs, reward: float | None = None) -> dict:
    return {
        "type": "frame",
        "t": env.world.t,
        "grid": base64.b64encode(bytes(obs.vision)).decode(),
        "velocity": env.world.ego.velocity_mps,
        "front_gap": front_gap(env.world),
        "status": env.world.status,
        "reward": reward,
    }


def create_app(
    world_config: WorldConfig | None = None,
    out_dir: str | Path = "runs/teleop",
    realtime: bool = True,
    lockstep: bool = False,
    frontend_dir: Path | None = None,
) -> FastAPI:
    config = world_config or WorldConfig()
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reward_params = RewardParams(t_max=config.t_max)
    session_counter = itertools.count()
    app = FastAPI(title="uncdrive teleop")

    @app.websocket("/ws")
    async def ws_session(websocket: WebSocket):
        await websocket.accept()
        session_id = next(session_counter)
        # Teleop defaults to scenario 1: correct perception, no uncertainty
        # channel, exactly the regime of the reference drives.
        env = DrivingEnv(config, scenario_by_id(1), "VEVV", reward_params)
        episode_seed = session_id
        obs = env.reset(episode_seed)
        header = make_header(
            "human", 1, "VEVV", config, reward_params, episode_seed
        )
        steps = []
        holder = _CommandHolder()
        a_prev_raw = 0.0

        reader_task = None
        if not lockstep:

            async def reader():
                try:
                    while True:
                        holder.feed(await websocket.receive_text())
                except WebSocketDisconnect:
                    holder.closed = True

            reader_task = asyncio.create_task(reader())

        def finalize(kind: str, t_terminal: int, total: float) -> None:
            if not steps:
                return
            end = {
                "type": "end",
                "kind": kind,
                "t_terminal": t_terminal,
                "total_reward": total,
                "cum_reward": total if kind == "aborted" else None,
                "warnings": holder.warnings,
            }
            record = EpisodeRecord(header=header, steps=steps, end=end)
            if kind != "aborted":
                end["cum_reward"] = record.cumulative_reward()
            path = out / f"human_s{session_id:03d}_{int(time.time())}.jsonl"
            write_log(record, path)

        total = 0.0
        try:
            await websocket.send_text(encode_message(_frame_payload(env, obs)))
            while True:
                if lockstep:
                    holder.feed(await websocket.receive_text())
                elif realtime:
                    await asyncio.sleep(config.dt)
                else:
                    await asyncio.sleep(0)
                if holder.closed:
                    raise WebSocketDisconnect(code=1006)
                a_tilde = holder.a_tilde  # hold-on-silence: previous value stays
                result = env.step(a_tilde)
                total += result.reward
                steps.append(
                    {
                        "type": "step",
                        "t": result.info["t"],
                        "case": result.info["case"],
                        "a_tilde": a_tilde,
                        "a": result.info["a"],
                        "r": result.reward,
                        "pos": result.info["position"],
                        "vel": result.info["velocity"],
                        "gap": result.info["front_gap"],
                        "obs": None,
                    }
                )
                if result.done:
                    finalize(result.info["status"], result.info["t"], total)
                    await websocket.send_text(
                        encode_message(
                            {
                                "type": "end",
                                "kind": result.info["status"],
                                "t": result.info["t"],
                                "traveled_m": result.info["position"],
                                "total_reward": total,
                                "warnings": holder.warnings,
                            }
                        )
                    )
                    await websocket.close()
                    return
                frame = _frame_payload(env, result.obs, result.reward)
                await websocket.send_text(encode_message(frame))
        except WebSocketDisconnect:
            finalize("aborted", env.world.t, total)
        finally:
            if reader_task is not None:
                reader_task.cancel()

    frontend = frontend_dir or default_frontend_dir()
    if frontend.is_dir():
        app.mount("/", StaticFiles(directory=frontend, html=True), name="ui")
    else:

        @app.get("/")
        async def index():
            return HTMLResponse(_FALLBACK_PAGE)

    return app
