"""Environment generation, scripted trials, and batch execution."""

import json
import math

import numpy as np
import pytest

from adaptsel import adapter as ad
from adaptsel import scene as sc
from adaptsel import simulator as sim


def angular_size(target, eye):
    dist = float(np.linalg.norm(np.asarray(target.position) - eye))
    return 2.0 * math.degrees(math.atan((target.scale[0] / 2.0) / dist))


# --- environment generation -------------------------------------------------


class TestEnvironmentSpec:
    def test_known_kinds_have_study_dimensions(self):
        spec = sim.environment_spec("deep", 2.5, 1)
        assert spec.region_size == (1.5, 1.5, 4.0)
        assert spec.object_count == 30
        assert sim.environment_spec("dense", 2.5, 1).object_count == 240
        assert sim.environment_spec("sparse", 2.5, 1).object_count == 10
        assert sim.environment_spec("flat", 2.5, 1).region_size == (3.0, 3.0, 1.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown environment"):
            sim.environment_spec("cave", 2.5, 1)

    def test_nonpositive_target_size_rejected(self):
        with pytest.raises(ValueError):
            sim.environment_spec("sparse", 0.0, 1)


class TestGenerateEnvironment:
    @pytest.mark.parametrize("kind", ["sparse", "flat", "deep"])
    @pytest.mark.parametrize("seed", [0, 7, 123])
    def test_counts_and_constraints(self, kind, seed):
        spec = sim.environment_spec(kind, 2.5, seed)
        scene, target_id = sim.generate_environment(spec)
        assert len(scene.targets) == spec.object_count
        assert target_id == "target"
        eye = np.asarray(sim.HMD_POSITION)
        lo, hi = sim._region_bounds(spec)
        target = scene.by_id(target_id)
        pos = np.asarray(target.position)
        assert np.all(pos >= lo + 0.4 - 1e-9) and np.all(pos <= hi - 0.4 + 1e-9)
        assert np.linalg.norm(pos - (lo + hi) / 2) >= 0.2
        assert angular_size(target, eye) == pytest.approx(2.5, rel=1e-6)

    def test_distractor_sizes_in_range(self):
        spec = sim.environment_spec("flat", 2.5, 11)
        scene, _ = sim.generate_environment(spec)
        eye = np.asarray(sim.HMD_POSITION)
        for t in scene.targets:
            if t.id == "target":
                continue
            size = angular_size(t, eye)
            assert 2.0 - 1e-6 <= size <= 4.0 + 1e-6

    def test_objects_do_not_interpenetrate(self):
        spec = sim.environment_spec("deep", 2.5, 3)
        scene, _ = sim.generate_environment(spec)
        pos = np.array([t.position for t in scene.targets])
        rad = np.array([t.bounding_radius() for t in scene.targets])
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                gap = np.linalg.norm(pos[i] - pos[j])
                assert gap > rad[i] + rad[j] - 1e-9

    def test_generation_is_deterministic(self):
        spec = sim.environment_spec("sparse", 0.5, 99)
        a, _ = sim.generate_environment(spec)
        b, _ = sim.generate_environment(spec)
        assert sc.scene_to_dict(a) == sc.scene_to_dict(b)

    def test_seeds_vary_the_layout(self):
        a, _ = sim.generate_environment(sim.environment_spec("sparse", 2.5, 1))
        b, _ = sim.generate_environment(sim.environment_spec("sparse", 2.5, 2))
        assert not np.allclose(a.by_id("target").position, b.by_id("target").position)


class TestTrajectoryParams:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            sim.TrajectoryParams(angular_speed=0.0)
        with pytest.raises(ValueError):
            sim.TrajectoryParams(tremor_sigma=-0.1)
        with pytest.raises(ValueError):
            sim.TrajectoryParams(frame_rate=0.0)


# --- trials -----------------------------------------------------------------


class TestRunTrial:
    def sparse_scene(self, seed=5):
        return sim.generate_environment(sim.environment_spec("sparse", 2.5, seed))

    def test_fixed_sticky_zero_tremor_succeeds(self, study_config):
        scene, target_id = self.sparse_scene()
        traj = sim.TrajectoryParams(tremor_sigma=0.0)
        result = sim.run_trial(scene, target_id, "StickyRay", traj, study_config, 0)
        assert result.success and not result.timeout
        assert result.final_technique == "StickyRay"
        assert result.switches == ()
        assert 0 < result.selection_time < sim.TRIAL_TIMEOUT
        assert result.rotational_movement > 0

    def test_invalid_mode_rejected(self, study_config):
        scene, target_id = self.sparse_scene()
        with pytest.raises(ValueError, match="mode"):
            sim.run_trial(
                scene, target_id, "Gaze", sim.TrajectoryParams(), study_config, 0
            )

    def test_unselectable_target_rejected(self, study_config):
        scene, _ = self.sparse_scene()
        doc = sc.scene_to_dict(scene)
        for t in doc["targets"]:
            if t["id"] == "target":
                t["selectable"] = False
        bad = sc.scene_from_dict(doc)
        with pytest.raises(ValueError, match="selectable"):
            sim.run_trial(
                bad, "target", "adaptive", sim.TrajectoryParams(), study_config, 0
            )

    def test_trial_is_deterministic_including_traces(self, study_config):
        scene, target_id = self.sparse_scene()
        traj = sim.TrajectoryParams()
        sink1, sink2 = sim._TraceSink(), sim._TraceSink()
        r1 = sim.run_trial(scene, target_id, "adaptive", traj, study_config, 42, sink1)
        r2 = sim.run_trial(scene, target_id, "adaptive", traj, study_config, 42, sink2)
        assert r1 == r2
        assert sink1.dump() == sink2.dump()

    def test_adaptive_dense_trial_ends_with_raycursor(self, study_config):
        scene, target_id = sim.generate_environment(
            sim.environment_spec("dense", 2.5, 4)
        )
        result = sim.run_trial(
            scene, target_id, "adaptive", sim.TrajectoryParams(), study_config, 4
        )
        assert result.success
        assert result.final_technique == "RayCursor"
        assert len(result.switches) >= 1

    def test_trace_frames_carry_full_pointer_state(self, study_config):
        scene, target_id = self.sparse_scene()
        sink = sim._TraceSink()
        sim.run_trial(
            scene, target_id, "adaptive", sim.TrajectoryParams(), study_config, 1, sink
        )
        records = [json.loads(line) for line in sink.lines]
        assert all(r["type"] == "frame" for r in records)
        first = records[0]
        assert set(first["pointer"]) == {"position", "direction", "trackpad_delta"}
        assert "scores" in first and "highlight" in first and "current" in first


# --- batches ----------------------------------------------------------------


class TestBatchConfig:
    def test_from_dict_round_trip(self):
        doc = {
            "environments": ["sparse"],
            "target_sizes": [2.5],
            "repetitions": 2,
            "modes": ["adaptive"],
            "base_seed": 7,
            "preset": "study",
            "trajectory": {"tremor_sigma": 0.0},
        }
        batch = sim.BatchConfig.from_dict(doc)
        assert batch.environments == ("sparse",)
        assert batch.repetitions == 2
        assert batch.base_seed == 7
        assert batch.trajectory.tremor_sigma == 0.0

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown batch config keys"):
            sim.BatchConfig.from_dict({"enviroments": ["sparse"]})

    def test_trial_seed_is_stable_and_distinct(self):
        a = sim._trial_seed(0, "sparse", 2.5, 0, "adaptive")
        b = sim._trial_seed(0, "sparse", 2.5, 0, "adaptive")
        c = sim._trial_seed(0, "sparse", 2.5, 1, "adaptive")
        assert a == b != c


class TestRunBatch:
    def small_batch(self):
        return sim.BatchConfig(
            environments=("sparse",), target_sizes=(2.5,), repetitions=2
        )

    def test_rows_and_outputs(self, tmp_path, study_config):
        rows = sim.run_batch(self.small_batch(), study_config, out_dir=tmp_path)
        assert [r["trial"] for r in rows] == ["trial_0000", "trial_0001"]
        assert all(r["environment"] == "sparse" for r in rows)
        summary = (tmp_path / "summary.csv").read_text()
        assert summary.splitlines()[0] == ",".join(sim.SUMMARY_COLUMNS)
        assert len(summary.splitlines()) == 3
        traces = sorted(p.name for p in (tmp_path / "traces").iterdir())
        assert traces == ["trial_0000.jsonl", "trial_0001.jsonl"]
        header = json.loads(
            (tmp_path / "traces" / "trial_0000.jsonl").read_text().splitlines()[0]
        )
        assert header["type"] == "header"
        assert header["config_hash"] == study_config.hash()
        assert len(list((tmp_path / "scenes").iterdir())) == 2

    def test_batch_reruns_are_byte_identical(self, tmp_path, study_config):
        rows1 = sim.run_batch(self.small_batch(), study_config, out_dir=tmp_path / "a")
        rows2 = sim.run_batch(self.small_batch(), study_config, out_dir=tmp_path / "b")
        assert rows1 == rows2
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (
            tmp_path / "b" / "summary.csv"
        ).read_bytes()
        for name in ("trial_0000.jsonl", "trial_0001.jsonl"):
            assert (tmp_path / "a" / "traces" / name).read_bytes() == (
                tmp_path / "b" / "traces" / name
            ).read_bytes()

    def test_empty_batch_yields_empty_table(self, tmp_path, study_config):
        batch = sim.BatchConfig(environments=())
        rows = sim.run_batch(batch, study_config, out_dir=tmp_path)
        assert rows == []
        assert (tmp_path / "summary.csv").read_text().splitlines() == [
            ",".join(sim.SUMMARY_COLUMNS)
        ]
