import json
from pathlib import Path

import pytest

from uncdrive.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGENCE,
    EXIT_OK,
    EXIT_USAGE,
    main,
)


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_train")
    code = main(
        [
            "train",
            "--scenario",
            "1",
            "--steps",
            "2500",
            "--seed",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    return out


class TestTrain:
    def test_smoke_run_artifacts(self, trained_run):
        manifest = json.loads((trained_run / "manifest.json").read_text())
        assert manifest["status"] == "complete"
        assert Path(manifest["final_checkpoint"]).exists()
        assert (trained_run / "training_episodes.csv").exists()

    def test_bad_scenario_is_usage_error(self, tmp_path, capsys):
        assert main(["train", "--scenario", "7", "--out", str(tmp_path)]) == EXIT_USAGE
        assert "usage error" in capsys.readouterr().err

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        code = main(
            [
                "train",
                "--scenario",
                "1",
                "--steps",
                "100",
                "--config",
                str(tmp_path / "nope.cfg"),
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == EXIT_CONFIG

    def test_invalid_config_contents(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("dt = -1\n")
        code = main(
            [
                "train",
                "--scenario",
                "1",
                "--steps",
                "100",
                "--config",
                str(bad),
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == EXIT_CONFIG


class TestTest:
    def ckpt(self, trained_run):
        manifest = json.loads((trained_run / "manifest.json").read_text())
        return manifest["final_checkpoint"]

    def test_ok(self, trained_run, tmp_path, capsys):
        code = main(
            [
                "test",
                "--policy",
                self.ckpt(trained_run),
                "--case",
                "vevv",
                "--episodes",
                "2",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        assert "finish_rate" in capsys.readouterr().out
        assert (tmp_path / "metrics.csv").exists()
        assert (tmp_path / "episode_000.jsonl").exists()

    def test_zero_episodes_is_usage_error(self, trained_run, tmp_path):
        code = main(
            [
                "test",
                "--policy",
                self.ckpt(trained_run),
                "--case",
                "vevv",
                "--episodes",
                "0",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_USAGE

    def test_xevv_guarded(self, trained_run, tmp_path, capsys):
        args = [
            "test",
            "--policy",
            self.ckpt(trained_run),
            "--case",
            "xevv",
            "--episodes",
            "1",
            "--out",
            str(tmp_path),
        ]
        assert main(args) == EXIT_CONFIG
        assert "--include-xevv" in capsys.readouterr().err
        assert main(args + ["--include-xevv"]) == EXIT_OK

    def test_missing_checkpoint(self, tmp_path):
        code = main(
            [
                "test",
                "--policy",
                str(tmp_path / "missing.npz"),
                "--case",
                "vevv",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_CONFIG

    def test_scenario_4_requires_informed_policy(self, trained_run, tmp_path):
        code = main(
            [
                "test",
                "--policy",
                self.ckpt(trained_run),  # scenario-1 policy
                "--case",
                "vevv",
                "--episodes",
                "1",
                "--as-scenario-4",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_CONFIG


class TestReplay:
    def test_ok_and_divergence(self, trained_run, tmp_path, capsys):
        test_out = tmp_path / "episodes"
        manifest = json.loads((trained_run / "manifest.json").read_text())
        assert (
            main(
                [
                    "test",
                    "--policy",
                    manifest["final_checkpoint"],
                    "--case",
                    "vevv",
                    "--episodes",
                    "1",
                    "--out",
                    str(test_out),
                ]
            )
            == EXIT_OK
        )
        log = test_out / "episode_000.jsonl"
        assert main(["replay", "--log", str(log)]) == EXIT_OK
        assert "replay ok" in capsys.readouterr().out

        # tamper with one logged velocity -> divergence exit code
        lines = log.read_text().splitlines()
        entry = json.loads(lines[5])
        entry["vel"] += 1e-9
        lines[5] = json.dumps(entry)
        tampered = tmp_path / "tampered.jsonl"
        tampered.write_text("\n".join(lines) + "\n")
        assert main(["replay", "--log", str(tampered)]) == EXIT_DIVERGENCE

    def test_missing_log(self, tmp_path):
        assert main(["replay", "--log", str(tmp_path / "none.jsonl")]) == EXIT_CONFIG

    def test_dump_grids(self, trained_run, tmp_path):
        test_out = tmp_path / "episodes"
        manifest = json.loads((trained_run / "manifest.json").read_text())
        main(
            [
                "test",
                "--policy",
                manifest["final_checkpoint"],
                "--case",
                "vevv",
                "--episodes",
                "1",
                "--out",
                str(test_out),
            ]
        )
        dump = tmp_path / "grids"
        code = main(
            [
                "replay",
                "--log",
                str(test_out / "episode_000.jsonl"),
                "--dump-grids",
                str(dump),
            ]
        )
        assert code == EXIT_OK
        assert len(list(dump.glob("*.pgm"))) > 0
