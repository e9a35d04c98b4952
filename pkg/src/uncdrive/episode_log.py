"""Line-delimited episode logs shared by agent, test and human (teleop) drives,
plus bit-exact replay."""

from __future__ import annotations

import base64
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .env import MPC, DrivingEnv
from .errors import ContractViolation, ReplayDivergence
from .observation import scenario as scenario_by_id
from .reward import RewardParams, cumulative_reward
from .sim_core import WorldConfig

LOG_VERSION = 1


@dataclass
class EpisodeRecord:
    header: dict
    steps: list  # per-step dicts (t, case, a_tilde, a, r, pos, vel, gap, obs)
    end: dict

    @property
    def status_kind(self) -> str:
        return self.end["kind"]

    @property
    def actions(self) -> list:
        return [s["a_tilde"] for s in self.steps]

    def cumulative_reward(self) -> float:
        """Undiscounted sum over the pre-terminal steps."""
        return cumulative_reward(s["r"] for s in self.steps[:-1])


def make_header(
    kind: str,
    scenario_id: int,
    case_source: str,
    config: WorldConfig,
    reward_params: RewardParams,
    episode_seed: int,
    policy_ref: str | None = None,
    force_zero_uncertainty: bool = False,
) -> dict:
    return {
        "type": "header",
        "version": LOG_VERSION,
        "kind": kind,
        "scenario": scenario_id,
        "case_source": case_source,
        "world_config": dataclasses.asdict(config),
        "reward_params": dataclasses.asdict(reward_params),
        "episode_seed": episode_seed,
        "policy_ref": policy_ref,
        "force_zero_uncertainty": force_zero_uncertainty,
    }


def env_from_header(header: dict) -> DrivingEnv:
    raw = dict(header["world_config"])
    raw["spawn_positions"] = tuple(
        (role, float(off), float(speed)) for role, off, speed in raw["spawn_positions"]
    )
    config = WorldConfig(**raw)
    return DrivingEnv(
        config,
        scenario_by_id(header["scenario"]),
        header["case_source"],
        RewardParams(**header["reward_params"]),
        force_zero_uncertainty=header.get("force_zero_uncertainty", False),
    )


def run_episode(
    env: DrivingEnv,
    act_fn,
    episode_seed: int,
    header: dict | None = None,
    store_obs: bool = False,
) -> EpisodeRecord:
    """Drive one full episode with `act_fn(Observation) -> a_tilde`."""
    obs = env.reset(episode_seed)
    steps = []
    while True:
        a_tilde = float(act_fn(obs))
        result = env.step(a_tilde)
        record = {
            "type": "step",
            "t": result.info["t"],
            "case": result.info["case"],
            "a_tilde": a_tilde,
            "a": result.info["a"],
            "r": result.reward,
            "pos": result.info["position"],
            "vel": result.info["velocity"],
            "gap": result.info["front_gap"],
            "obs": base64.b64encode(bytes(obs.vision)).decode() if store_obs else None,
        }
        steps.append(record)
        if result.done:
            end = {
                "type": "end",
                "kind": result.info["status"],
                "t_terminal": result.info["t"],
                "total_reward": sum(s["r"] for s in steps),
            }
            break
        obs = result.obs
    record = EpisodeRecord(header=header or {}, steps=steps, end=end)
    record.end["cum_reward"] = record.cumulative_reward()
    return record


def write_log(record: EpisodeRecord, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(record.header) + "\n")
        for step in record.steps:
            fh.write(json.dumps(step) + "\n")
        fh.write(json.dumps(record.end) + "\n")


def read_log(path: str | Path) -> EpisodeRecord:
    header = None
    steps = []
    end = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if entry["type"] == "header":
            header = entry
        elif entry["type"] == "step":
            steps.append(entry)
        elif entry["type"] == "end":
            end = entry
        else:
            raise ContractViolation(f"unknown log record type {entry['type']!r}")
    if header is None or end is None or not steps:
        raise ContractViolation(f"incomplete episode log {path}")
    return EpisodeRecord(header=header, steps=steps, end=end)


REPLAY_FIELDS = ("case", "a", "r", "pos", "vel", "gap")


def replay(record: EpisodeRecord, grid_dump_dir: str | Path | None = None) -> None:
    """Re-simulate the logged raw action sequence and demand bit-exact
    agreement on every logged step field; raises ReplayDivergence otherwise."""
    env = env_from_header(record.header)
    obs = env.reset(record.header["episode_seed"])
    dump_dir = Path(grid_dump_dir) if grid_dump_dir else None
    if dump_dir:
        dump_dir.mkdir(parents=True, exist_ok=True)
    for i, logged in enumerate(record.steps):
        if dump_dir is not None:
            from .perception import write_gray_pgm

            write_gray_pgm(obs.gray_image(), dump_dir / f"step_{i:05d}.pgm")
        result = env.step(logged["a_tilde"])
        resim = {
            "case": result.info["case"],
            "a": result.info["a"],
            "r": result.reward,
            "pos": result.info["position"],
            "vel": result.info["velocity"],
            "gap": result.info["front_gap"],
        }
        for field in REPLAY_FIELDS:
            if resim[field] != logged[field]:
                raise ReplayDivergence(i, field, logged[field], resim[field])
        if result.done:
            if i != len(record.steps) - 1:
                raise ReplayDivergence(i, "done", "running", result.info["status"])
            if result.info["status"] != record.end["kind"]:
                raise ReplayDivergence(
                    i, "kind", record.end["kind"], result.info["status"]
                )
            return
        obs = result.obs
    # Aborted teleop sessions legitimately end without a terminal transition.
    if record.end["kind"] == "aborted":
        return
    raise ReplayDivergence(len(record.steps), "done", record.end["kind"], "running")
