import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from uncdrive.env import MPC
from uncdrive.episode_log import read_log, replay, write_log
from uncdrive.errors import ContractViolation
from uncdrive.net import PolicyParams
from uncdrive.ppo import PpoHyperParams, load_checkpoint
from uncdrive.protocol import (
    BehaviorMetrics,
    ExperimentConfig,
    _TopK,
    compute_metrics,
    derive_seed,
    record_human_reference,
    select_best,
    train_experiment,
)
from uncdrive.protocol import test_policy as evaluate_policy
from uncdrive.reward import RewardParams
from uncdrive.sim_core import WorldConfig


def smoke_cfg(out_dir, scenario_id=1, seed=0, total_steps=6000):
    return ExperimentConfig(
        scenario_id=scenario_id,
        seed=seed,
        total_steps=total_steps,
        validate_every_n_episodes=5,
        validation_episodes=2,
        hyper=PpoHyperParams(hidden_dim=32, rollout_length=512, minibatch_size=128),
        out_dir=Path(out_dir),
    )


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)

    def test_component_sensitivity(self):
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
        assert derive_seed(1, 2, 3) != derive_seed(3, 2, 1)

    def test_uint32_range(self):
        s = derive_seed(7, 7)
        assert 0 <= s < 2**32


class TestExperimentConfig:
    def test_training_cases(self, tmp_path):
        assert smoke_cfg(tmp_path, 1).training_case == "VEVV"
        assert smoke_cfg(tmp_path, 2).training_case == MPC
        assert smoke_cfg(tmp_path, 3).training_case == MPC

    def test_scenario_4_not_trainable(self, tmp_path):
        with pytest.raises(ContractViolation):
            smoke_cfg(tmp_path, 4).training_case

    def test_config_hash_sensitivity(self, tmp_path):
        a = smoke_cfg(tmp_path, 1)
        b = dataclasses.replace(a, reward=RewardParams(beta=4.0))
        assert a.config_hash() != b.config_hash()
        assert a.config_hash() == smoke_cfg(tmp_path, 1).config_hash()


class TestTopK:
    def test_keeps_three_highest(self, tmp_path):
        topk = _TopK(3, tmp_path)
        touched = []

        def save_fn(path):
            Path(path).write_text("x")
            touched.append(path)

        for episode, reward in enumerate([5.0, 9.0, 3.0, 9.0, 7.0]):
            topk.offer(reward, episode, save_fn)
        kept = sorted(e["reward"] for e in topk.entries)
        assert kept == [7.0, 9.0, 9.0]
        # evicted checkpoint files are deleted
        live = {e["path"] for e in topk.entries}
        for path in touched:
            assert (str(path) in live) == Path(path).exists()

    def test_tie_keeps_earlier(self, tmp_path):
        topk = _TopK(1, tmp_path)
        save = lambda p: Path(p).write_text("x")
        topk.offer(5.0, 0, save)
        topk.offer(5.0, 1, save)
        assert topk.entries[0]["episode"] == 0

    def test_fills_below_capacity_unconditionally(self, tmp_path):
        topk = _TopK(3, tmp_path)
        save = lambda p: Path(p).write_text("x")
        topk.offer(-100.0, 0, save)
        topk.offer(-200.0, 1, save)
        assert len(topk.entries) == 2


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke_run")
    cfg = smoke_cfg(out)
    manifest = train_experiment(cfg)
    return cfg, out, manifest


class TestTrainExperiment:
    def test_manifest_complete(self, smoke_run):
        cfg, out, manifest = smoke_run
        assert manifest["status"] == "complete"
        assert manifest["episodes"] > 0
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk["status"] == "complete"
        assert on_disk["config_hash"] == cfg.config_hash()

    def test_checkpoints_exist_and_load(self, smoke_run):
        cfg, out, manifest = smoke_run
        assert 1 <= len(manifest["checkpoints"]) <= 3
        for path in manifest["checkpoints"] + [manifest["final_checkpoint"]]:
            params, h, meta = load_checkpoint(path)
            assert params.input_dim == 106
            assert meta["scenario"] == 1

    def test_episode_csv_schema(self, smoke_run):
        _, out, manifest = smoke_run
        lines = (out / "training_episodes.csv").read_text().splitlines()
        assert lines[0] == "episode,end_step,steps,status,cum_reward,total_reward,sigma"
        assert len(lines) - 1 == manifest["episodes"]

    def test_validation_csv_written(self, smoke_run):
        cfg, out, manifest = smoke_run
        lines = (out / "validation.csv").read_text().splitlines()
        assert lines[0] == "episode,global_step,mean_return,mean_cum_reward"
        expected = manifest["episodes"] // cfg.validate_every_n_episodes
        assert abs((len(lines) - 1) - expected) <= 1

    def test_two_runs_bitwise_identical(self, smoke_run, tmp_path):
        cfg, _, _ = smoke_run
        cfg2 = dataclasses.replace(cfg, out_dir=tmp_path / "rerun")
        train_experiment(cfg2)
        a, _, _ = load_checkpoint(Path(cfg.out_dir) / "checkpoints" / "ckpt_final.npz")
        b, _, _ = load_checkpoint(tmp_path / "rerun" / "checkpoints" / "ckpt_final.npz")
        for key in a.weights:
            assert np.array_equal(a.weights[key], b.weights[key])

    def test_select_best_returns_candidate(self, smoke_run):
        cfg, out, manifest = smoke_run
        params = select_best(out, cfg)
        assert params.input_dim == 106
        selection = json.loads((out / "selection.json").read_text())
        assert selection["chosen"]["path"] in manifest["checkpoints"]
        means = [c["mean"] for c in selection["candidates"]]
        assert selection["chosen"]["mean"] == max(means)

    def test_select_best_without_checkpoints(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"checkpoints": []}))
        with pytest.raises(ContractViolation):
            select_best(tmp_path, smoke_cfg(tmp_path))


class TestTestPolicy:
    def test_bookkeeping_and_replayable_logs(self, smoke_run, tmp_path):
        cfg, out, manifest = smoke_run
        params, _, _ = load_checkpoint(manifest["final_checkpoint"])
        metrics, records = evaluate_policy(
            params, "VEVV", 3, 1, cfg, out_dir=tmp_path / "test_vevv"
        )
        assert metrics.episodes == 3
        logs = sorted((tmp_path / "test_vevv").glob("episode_*.jsonl"))
        assert len(logs) == 3
        for log in logs:
            replay(read_log(log))
        assert (tmp_path / "test_vevv" / "metrics.csv").exists()
        assert (tmp_path / "test_vevv" / "boxplot.csv").exists()
        summary = json.loads((tmp_path / "test_vevv" / "summary.json").read_text())
        assert summary["episodes"] == 3
        rates = (
            summary["finish_rate"]
            + summary["collision_rate"]
            + summary["timeout_rate"]
            + summary["stalled_rate"]
        )
        assert rates == pytest.approx(1.0)

    def test_deterministic_across_calls(self, smoke_run):
        cfg, _, manifest = smoke_run
        params, _, _ = load_checkpoint(manifest["final_checkpoint"])
        m1, r1 = evaluate_policy(params, "VEXX", 2, 1, cfg)
        m2, r2 = evaluate_policy(params, "VEXX", 2, 1, cfg)
        for a, b in zip(r1, r2):
            assert a.steps == b.steps

    def test_case_changes_seeds(self, smoke_run):
        cfg, _, manifest = smoke_run
        params, _, _ = load_checkpoint(manifest["final_checkpoint"])
        _, r_a = evaluate_policy(params, "VEVV", 1, 1, cfg)
        _, r_b = evaluate_policy(params, "VEXX", 1, 1, cfg)
        assert r_a[0].header["episode_seed"] != r_b[0].header["episode_seed"]

    def test_input_dim_mismatch(self, smoke_run):
        cfg, _, _ = smoke_run
        wrong = PolicyParams.init(110, 8, seed=0)
        with pytest.raises(ContractViolation):
            evaluate_policy(wrong, "VEVV", 1, 1, cfg)


class TestComputeMetrics:
    def fake_record(self, kinds_actions):
        from uncdrive.episode_log import EpisodeRecord

        kind, actions = kinds_actions
        steps = [
            {
                "t": i + 1,
                "case": "VEVV",
                "a_tilde": a,
                "a": a,
                "r": 1.0,
                "pos": float(i),
                "vel": 2.0,
                "gap": 10.0 + i,
                "obs": None,
            }
            for i, a in enumerate(actions)
        ]
        return EpisodeRecord(header={}, steps=steps, end={"type": "end", "kind": kind})

    def test_counting_example(self):
        record = self.fake_record(("finished", [0.5, -0.2, 0.0, -0.1, 0.3]))
        metrics = compute_metrics([record])
        # 2 braking steps, 3 non-braking steps (zero counts as throttle side)
        assert metrics.brake_to_throttle_ratio[0] == pytest.approx(2 / 3)
        assert metrics.brake_frequency[0] == pytest.approx(2 / 5)
        assert metrics.finish_rate == 1.0
        assert metrics.traveled_distance_m[0] == 4.0
        assert list(metrics.front_distance_m) == [10.0, 11.0, 12.0, 13.0, 14.0]

    def test_all_brake_is_infinite_ratio(self):
        record = self.fake_record(("stalled", [-0.5, -0.5]))
        metrics = compute_metrics([record])
        assert np.isinf(metrics.brake_to_throttle_ratio[0])

    def test_rates_partition(self):
        records = [
            self.fake_record(("finished", [0.1])),
            self.fake_record(("collided", [0.1])),
            self.fake_record(("timeout", [0.1])),
            self.fake_record(("finished", [0.1])),
        ]
        metrics = compute_metrics(records)
        assert metrics.finish_rate == 0.5
        assert metrics.collision_rate == 0.25
        assert metrics.timeout_rate == 0.25
        assert metrics.stalled_rate == 0.0

    def test_summary_quartiles_against_numpy(self):
        records = [
            self.fake_record(("finished", [0.1] * n)) for n in (3, 5, 7, 9, 11)
        ]
        metrics = compute_metrics(records)
        stats = metrics.summary()["episode_steps"]
        assert stats["median"] == 7.0
        assert stats["q1"] == 5.0 and stats["q3"] == 9.0

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            compute_metrics([])

    def test_boxplot_csv_panels(self, tmp_path):
        metrics = compute_metrics([self.fake_record(("finished", [0.1, -0.1]))])
        path = tmp_path / "box.csv"
        metrics.write_boxplot_csv(path, label="VEVV")
        lines = path.read_text().splitlines()
        assert lines[0] == "label,panel,min,q1,median,q3,max"
        panels = [line.split(",")[1] for line in lines[1:]]
        assert panels == [
            "traveled_distance_m",
            "episode_steps",
            "brake_to_throttle_ratio",
            "front_distance_m",
        ]


class TestHumanReference:
    def test_trace_extraction(self, tmp_path):
        from uncdrive.episode_log import make_header, run_episode
        from uncdrive.env import DrivingEnv
        from uncdrive.observation import scenario

        cfg = WorldConfig()
        env = DrivingEnv(cfg, scenario(1), "VEVV")
        header = make_header("human", 1, "VEVV", cfg, env.reward_params, 42)
        record = run_episode(env, lambda obs: 0.3, 42, header=header)
        path = tmp_path / "human.jsonl"
        write_log(record, path)
        trace = record_human_reference(path)
        assert trace["kind"] == "human"
        assert len(trace["t"]) == len(record.steps)
        assert trace["front_distance_m"][0] == record.steps[0]["gap"]
        assert isinstance(trace["metrics"], BehaviorMetrics)
