"""Blend schedules, identity maps, and single-pass blending."""

import numpy as np
import pytest
import torch

from motionblend.blending import (
    BlendSchedule,
    blend,
    load_schedule,
    make_id_map,
    parse_schedule,
)
from motionblend.pyramid import ModelConfig, PyramidModel
from motionblend.representation import LevelSpec

from conftest import make_toy_skeleton


def _model(T=64, identities=("sway", "twist", "wave")):
    model = PyramidModel(
        skeleton=make_toy_skeleton(),
        num_contacts=2,
        fps=30.0,
        level_spec=LevelSpec.for_total_frames(T),
        identities=list(identities),
        config=ModelConfig(hidden_width=32, num_layers=1),
        seed=0,
    )
    model.trained_stages = 7
    return model


class TestSchedule:
    def test_requires_segments(self):
        with pytest.raises(ValueError):
            BlendSchedule(())

    def test_zero_length_segment_rejected(self):
        with pytest.raises(ValueError, match="zero-length"):
            BlendSchedule((("a", 0),))

    def test_parse_lines(self):
        schedule = parse_schedule("# demo\nsway=30\n twist = 12 \n")
        assert schedule.segments == (("sway", 30), ("twist", 12))
        assert schedule.total_frames == 42

    def test_parse_errors(self):
        with pytest.raises(ValueError, match="identity=frames"):
            parse_schedule("sway 30")
        with pytest.raises(ValueError, match="integer"):
            parse_schedule("sway=ten")

    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "schedule.txt"
        path.write_text("sway=20\ntwist=44\n")
        assert load_schedule(path).segments == (("sway", 20), ("twist", 44))

    def test_describe(self):
        text = BlendSchedule.halves("a", "b", 64).describe()
        assert "a x 32" in text and "b x 32" in text and "64 frames" in text


class TestMakeIdMap:
    def test_single_segment_constant(self):
        model = _model()
        id_map = make_id_map(BlendSchedule.constant("twist", 64), model)
        assert id_map.num_frames == 64
        assert np.all(id_map.labels == 1)

    def test_half_half(self):
        model = _model()
        id_map = make_id_map(BlendSchedule.halves("sway", "twist", 64), model)
        assert np.all(id_map.labels[:32] == 0)
        assert np.all(id_map.labels[32:] == 1)

    def test_three_equal_thirds(self):
        model = _model(T=360)
        schedule = BlendSchedule((("sway", 120), ("twist", 120), ("wave", 120)))
        id_map = make_id_map(schedule, model)
        assert id_map.num_frames == 360
        assert np.all(id_map.labels[:120] == 0)
        assert np.all(id_map.labels[120:240] == 1)
        assert np.all(id_map.labels[240:] == 2)

    def test_unknown_identity_names_available(self):
        model = _model()
        with pytest.raises(KeyError, match="sway, twist, wave"):
            make_id_map(BlendSchedule.constant("jazz", 64), model)


class TestBlend:
    def test_output_length_equals_schedule(self):
        model = _model()
        schedule = BlendSchedule.halves("sway", "twist", 64)
        tensor, raw = blend(model, schedule, seed=0)
        assert tensor.num_frames == 64
        assert raw.num_frames == 64
        assert raw.frames.shape[1] == model.skeleton.channel_total

    def test_same_seed_reproducible(self):
        model = _model()
        schedule = BlendSchedule.halves("sway", "twist", 64)
        t1, r1 = blend(model, schedule, seed=5)
        t2, r2 = blend(model, schedule, seed=5)
        assert np.array_equal(t1.data, t2.data)
        assert np.array_equal(r1.frames, r2.frames)

    def test_custom_length_supported(self):
        model = _model()
        schedule = BlendSchedule((("sway", 50), ("twist", 46)))
        tensor, raw = blend(model, schedule, seed=0)
        assert tensor.num_frames == 96

    def test_root_trajectory_continuous(self):
        # decoding integrates planar velocity, so root x/z never jumps more
        # than one frame's worth of the encoded velocity
        model = _model()
        with torch.no_grad():  # give stage 1 some signal
            model.z_star(1).normal_(generator=torch.Generator().manual_seed(1))
        schedule = BlendSchedule.halves("sway", "twist", 64)
        tensor, raw = blend(model, schedule, seed=3)
        xz = raw.root_positions()[:, [0, 2]]
        steps = np.abs(np.diff(xz, axis=0))
        vel_bound = np.abs(tensor.root_block[:, 1:]).max() / tensor.fps + 1e-6
        assert steps.max() <= vel_bound
