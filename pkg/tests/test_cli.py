"""End-to-end CLI contracts on a tiny two-clip experiment."""

import numpy as np
import pytest
import yaml

from motionblend.bvh import parse_bvh, write_bvh
from motionblend.cli import main
from motionblend.pyramid import load_checkpoint

from conftest import make_toy_motion, make_toy_skeleton

TINY_TRAIN = {
    "iterations_per_level": 2,
    "hidden_width": 24,
    "num_layers": 1,
    "learning_rate": 1e-4,
}


@pytest.fixture()
def experiment_dir(tmp_path):
    skeleton = make_toy_skeleton()
    for kind in ("sway", "twist"):
        motion = make_toy_motion(kind, frames=48)
        (tmp_path / f"{kind}.bvh").write_text(write_bvh(skeleton, motion))
    config = {
        "motions": [
            {"path": "sway.bvh", "identity": "sway"},
            {"path": "twist.bvh", "identity": "twist"},
        ],
        "fps": 30,
        "seed": 0,
        "output_dir": "run",
        "train": dict(TINY_TRAIN),
        "conditioning": {"kind": "spade", "levels": [1]},
        "metrics": {"window": 10, "local_window": 4, "num_samples": 4},
    }
    (tmp_path / "experiment.yaml").write_text(yaml.safe_dump(config))
    return tmp_path


def _train(experiment_dir, *extra):
    rc = main(["train", str(experiment_dir / "experiment.yaml"), *extra])
    assert rc == 0
    return experiment_dir / "run"


class TestTrainCommand:
    def test_produces_checkpoint_and_telemetry(self, experiment_dir):
        run_dir = _train(experiment_dir)
        assert (run_dir / "checkpoint.pkl").exists()
        assert (run_dir / "config.yaml").exists()
        telemetry = (run_dir / "telemetry.csv").read_text().strip().splitlines()
        assert len(telemetry) == 1 + 4 * TINY_TRAIN["iterations_per_level"]
        model = load_checkpoint(run_dir / "checkpoint.pkl")
        assert model.identities == ["sway", "twist"]
        assert model.is_trained

    def test_missing_motion_file_fails_without_checkpoint(self, experiment_dir, capsys):
        config = yaml.safe_load((experiment_dir / "experiment.yaml").read_text())
        config["motions"][0]["path"] = "missing.bvh"
        bad = experiment_dir / "bad.yaml"
        bad.write_text(yaml.safe_dump(config))
        rc = main(["train", str(bad), "--out", str(experiment_dir / "badrun")])
        assert rc == 1
        assert "missing.bvh" in capsys.readouterr().err
        assert not (experiment_dir / "badrun" / "checkpoint.pkl").exists()

    def test_set_override(self, experiment_dir):
        run_dir = experiment_dir / "override"
        rc = main(
            [
                "train",
                str(experiment_dir / "experiment.yaml"),
                "--out",
                str(run_dir),
                "--set",
                "train.iterations_per_level=3",
            ]
        )
        assert rc == 0
        telemetry = (run_dir / "telemetry.csv").read_text().strip().splitlines()
        assert len(telemetry) == 1 + 4 * 3
        resolved = yaml.safe_load((run_dir / "resolved_config.yaml").read_text())
        assert resolved["train"]["iterations_per_level"] == 3


class TestBlendCommand:
    def test_blend_writes_bvh_of_schedule_length(self, experiment_dir, capsys):
        run_dir = _train(experiment_dir)
        schedule = experiment_dir / "schedule.txt"
        schedule.write_text("sway=24\ntwist=24\n")
        out = experiment_dir / "blend.bvh"
        rc = main(
            ["blend", str(run_dir / "checkpoint.pkl"), str(schedule), "--seed", "3", "--out", str(out)]
        )
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "sway x 24" in stdout
        skeleton, motion = parse_bvh(out.read_text())
        assert motion.num_frames == 48
        assert skeleton.names == make_toy_skeleton().names

    def test_blend_deterministic(self, experiment_dir):
        run_dir = _train(experiment_dir)
        schedule = experiment_dir / "schedule.txt"
        schedule.write_text("sway=24\ntwist=24\n")
        outs = []
        for name in ("a.bvh", "b.bvh"):
            out = experiment_dir / name
            rc = main(
                ["blend", str(run_dir / "checkpoint.pkl"), str(schedule), "--seed", "7", "--out", str(out)]
            )
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_unknown_identity_reports_available(self, experiment_dir, capsys):
        run_dir = _train(experiment_dir)
        schedule = experiment_dir / "schedule.txt"
        schedule.write_text("jazz=48\n")
        rc = main(
            ["blend", str(run_dir / "checkpoint.pkl"), str(schedule), "--out", str(experiment_dir / "x.bvh")]
        )
        assert rc == 1
        err = capsys.readouterr().err
        assert "jazz" in err and "sway" in err and "twist" in err


class TestEvalCommand:
    def test_report_contains_all_metrics(self, experiment_dir, capsys):
        run_dir = _train(experiment_dir)
        rc = main(
            [
                "eval",
                str(run_dir / "checkpoint.pkl"),
                str(experiment_dir / "experiment.yaml"),
                "--out",
                str(experiment_dir / "eval"),
            ]
        )
        assert rc == 0
        report = (experiment_dir / "eval" / "report.txt").read_text()
        for key in ("fid", "cov", "gdiv", "ldiv", "inter_div", "intra_div"):
            assert f"{key} = " in report
        assert (experiment_dir / "eval" / "smoothness.png").exists()
        assert (experiment_dir / "eval" / "velocity_change.csv").exists()

    def test_single_sample_marks_pairwise_diversity_unavailable(self, experiment_dir):
        run_dir = _train(experiment_dir)
        rc = main(
            [
                "eval",
                str(run_dir / "checkpoint.pkl"),
                str(experiment_dir / "experiment.yaml"),
                "--out",
                str(experiment_dir / "eval1"),
                "--samples",
                "1",
            ]
        )
        assert rc == 0
        report = (experiment_dir / "eval1" / "report.txt").read_text()
        assert "inter_div = unavailable" in report
        assert "intra_div = unavailable" in report

    def test_eval_deterministic(self, experiment_dir):
        run_dir = _train(experiment_dir)
        blobs = []
        for name in ("e1", "e2"):
            rc = main(
                [
                    "eval",
                    str(run_dir / "checkpoint.pkl"),
                    str(experiment_dir / "experiment.yaml"),
                    "--out",
                    str(experiment_dir / name),
                    "--seed",
                    "11",
                ]
            )
            assert rc == 0
            blobs.append(
                tuple(
                    (experiment_dir / name / f).read_bytes()
                    for f in (
                        "report.txt",
                        "velocity_change.csv",
                        "acceleration_change.csv",
                        "smoothness.png",
                    )
                )
            )
        assert blobs[0] == blobs[1]


class TestInspectCommand:
    def test_prints_checkpoint_summary(self, experiment_dir, capsys):
        run_dir = _train(experiment_dir)
        rc = main(["inspect-checkpoint", str(run_dir / "checkpoint.pkl")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sway, twist" in out
        assert "spade" in out
        assert "trained stages:     7/7" in out

    def test_bad_checkpoint_path(self, experiment_dir, capsys):
        rc = main(["inspect-checkpoint", str(experiment_dir / "nope.pkl")])
        assert rc == 1
