"""Command-line interface: exit codes, outputs, and trace replay."""

import json

import pytest

from adaptsel import cli


def run(argv):
    return cli.main(argv)


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.json"
    assert run(
        ["generate", "--env", "sparse", "--seed", "5", "--target-size", "2.5",
         "--out", str(path)]
    ) == cli.EXIT_OK
    return path


class TestParsing:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--help"])
        assert exc.value.code == 0
        assert "generate" in capsys.readouterr().out

    def test_no_command_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run([])
        assert exc.value.code == cli.EXIT_USAGE

    def test_unknown_command_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["frobnicate"])
        assert exc.value.code == cli.EXIT_USAGE


class TestGenerateAndValidate:
    def test_generate_prints_target_id(self, tmp_path, capsys):
        path = tmp_path / "gen.json"
        assert run(
            ["generate", "--env", "sparse", "--seed", "5", "--target-size", "2.5",
             "--out", str(path)]
        ) == cli.EXIT_OK
        assert capsys.readouterr().out.strip().splitlines()[-1] == "target"
        doc = json.loads(path.read_text())
        assert len(doc["targets"]) == 10

    def test_validate_scene_ok(self, scene_file, capsys):
        assert run(["validate", "--scene", str(scene_file)]) == cli.EXIT_OK
        assert "10 targets" in capsys.readouterr().out

    def test_validate_missing_scene_is_config_error(self, tmp_path):
        assert (
            run(["validate", "--scene", str(tmp_path / "nope.json")])
            == cli.EXIT_CONFIG
        )

    def test_validate_corrupt_scene_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"version": 1, "targets": [{"id": "x"}]}')
        assert run(["validate", "--scene", str(bad)]) == cli.EXIT_CONFIG

    def test_validate_nothing_is_a_usage_error(self):
        assert run(["validate"]) == cli.EXIT_USAGE

    def test_validate_batch_config_counts_trials(self, tmp_path, capsys):
        cfg = tmp_path / "batch.json"
        cfg.write_text(json.dumps({"environments": ["sparse"], "repetitions": 2,
                                   "target_sizes": [2.5]}))
        assert run(["validate", "--config", str(cfg)]) == cli.EXIT_OK
        assert "2 trials" in capsys.readouterr().out

    def test_validate_unknown_config_key_is_config_error(self, tmp_path):
        cfg = tmp_path / "batch.json"
        cfg.write_text(json.dumps({"enviroments": ["sparse"]}))
        assert run(["validate", "--config", str(cfg)]) == cli.EXIT_CONFIG


class TestTrial:
    def test_trial_outputs_result_json(self, scene_file, capsys):
        assert run(
            ["trial", "--scene", str(scene_file), "--target", "target",
             "--seed", "3"]
        ) == cli.EXIT_OK
        result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert result["success"] == 1 or result["success"] is True
        assert result["final_technique"] in ("StickyRay", "RayCursor")

    def test_trial_is_deterministic(self, scene_file, capsys):
        argv = ["trial", "--scene", str(scene_file), "--target", "target",
                "--seed", "3"]
        assert run(argv) == cli.EXIT_OK
        first = capsys.readouterr().out
        assert run(argv) == cli.EXIT_OK
        assert capsys.readouterr().out == first

    def test_unknown_target_is_config_error(self, scene_file):
        assert (
            run(["trial", "--scene", str(scene_file), "--target", "ghost"])
            == cli.EXIT_CONFIG
        )

    def test_missing_scene_is_config_error(self, tmp_path):
        assert (
            run(["trial", "--scene", str(tmp_path / "nope.json"),
                 "--target", "target"])
            == cli.EXIT_CONFIG
        )

    def test_invalid_mode_is_usage_error(self, scene_file):
        assert (
            run(["trial", "--scene", str(scene_file), "--target", "target",
                 "--mode", "Gaze"])
            == cli.EXIT_USAGE
        )


class TestBatch:
    def test_small_batch_writes_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "batch.json"
        cfg.write_text(json.dumps({"environments": ["sparse"], "repetitions": 1,
                                   "target_sizes": [2.5]}))
        out = tmp_path / "out"
        assert run(["batch", "--config", str(cfg), "--out", str(out)]) == cli.EXIT_OK
        assert "1 trials" in capsys.readouterr().out
        assert (out / "summary.csv").exists()
        assert (out / "traces" / "trial_0000.jsonl").exists()

    def test_bad_config_is_config_error(self, tmp_path):
        cfg = tmp_path / "batch.json"
        cfg.write_text("{not json")
        assert (
            run(["batch", "--config", str(cfg), "--out", str(tmp_path / "o")])
            == cli.EXIT_CONFIG
        )


class TestReplay:
    @pytest.fixture
    def trace_file(self, scene_file, tmp_path):
        path = tmp_path / "trace.jsonl"
        assert run(
            ["trial", "--scene", str(scene_file), "--target", "target",
             "--seed", "3", "--trace", str(path)]
        ) == cli.EXIT_OK
        return path

    def test_replay_of_fresh_trace_exits_zero(self, trace_file, capsys):
        assert run(["replay", "--trace", str(trace_file)]) == cli.EXIT_OK
        assert "replay ok" in capsys.readouterr().out

    def test_tampered_score_is_a_divergence(self, trace_file, capsys):
        lines = trace_file.read_text().splitlines()
        rec = json.loads(lines[10])
        rec["scores"]["StickyRay"] = round(rec["scores"]["StickyRay"] + 0.01, 12)
        lines[10] = json.dumps(rec, sort_keys=True)
        trace_file.write_text("\n".join(lines) + "\n")
        assert run(["replay", "--trace", str(trace_file)]) == cli.EXIT_DIVERGENCE
        assert "diverged" in capsys.readouterr().err

    def test_tampered_technique_is_a_divergence(self, trace_file):
        lines = trace_file.read_text().splitlines()
        rec = json.loads(lines[5])
        rec["current"] = "RayCursor"
        lines[5] = json.dumps(rec, sort_keys=True)
        trace_file.write_text("\n".join(lines) + "\n")
        assert run(["replay", "--trace", str(trace_file)]) == cli.EXIT_DIVERGENCE

    def test_missing_header_is_config_error(self, trace_file):
        lines = trace_file.read_text().splitlines()
        trace_file.write_text("\n".join(lines[1:]) + "\n")
        assert run(["replay", "--trace", str(trace_file)]) == cli.EXIT_CONFIG

    def test_config_hash_mismatch_is_config_error(self, trace_file):
        lines = trace_file.read_text().splitlines()
        header = json.loads(lines[0])
        header["config_hash"] = "0" * 16
        lines[0] = json.dumps(header, sort_keys=True)
        trace_file.write_text("\n".join(lines) + "\n")
        assert run(["replay", "--trace", str(trace_file)]) == cli.EXIT_CONFIG

    def test_unreadable_trace_is_config_error(self, tmp_path):
        assert (
            run(["replay", "--trace", str(tmp_path / "nope.jsonl")])
            == cli.EXIT_CONFIG
        )
