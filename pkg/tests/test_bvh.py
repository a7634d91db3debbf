"""BVH parse/write/edit contracts."""

import numpy as np
import pytest

from motionblend.bvh import (
    BvhError,
    Joint,
    RawMotion,
    Skeleton,
    euler_to_matrices,
    parse_bvh,
    parse_name_list,
    resample,
    select_joints,
    trim,
    write_bvh,
)
from motionblend.representation import forward_kinematics, raw_motion_rotations

from conftest import make_toy_motion, make_toy_skeleton

SINGLE_JOINT_BVH = """HIERARCHY
ROOT hip
{
\tOFFSET 0.0 0.0 0.0
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation
\tEnd Site
\t{
\t\tOFFSET 0.0 1.0 0.0
\t}
}
MOTION
Frames: 2
Frame Time: 0.033333
0 0 0 0 0 0
0 0 0 0 0 0
"""

# hand-computed channel table for a 3-joint chain (root ZYX, others ZXY/XYZ)
CHAIN_BVH = """HIERARCHY
ROOT a
{
\tOFFSET 0.0 0.0 0.0
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation
\tJOINT b
\t{
\t\tOFFSET 0.0 1.0 0.0
\t\tCHANNELS 3 Zrotation Xrotation Yrotation
\t\tJOINT c
\t\t{
\t\t\tOFFSET 0.0 2.0 0.0
\t\t\tCHANNELS 3 Xrotation Yrotation Zrotation
\t\t\tEnd Site
\t\t\t{
\t\t\t\tOFFSET 0.0 0.5 0.0
\t\t\t}
\t\t}
\t}
}
MOTION
Frames: 3
Frame Time: 0.05
1.5 2.25 -0.75 10.0 20.0 30.0 -15.0 5.0 0.0 45.0 -30.0 12.5
0.0 1.0 0.0 90.0 0.0 0.0 0.0 90.0 0.0 0.0 0.0 90.0
-2.0 0.5 3.125 -10.5 60.25 -33.125 12.0 -7.75 81.5 -0.125 0.25 -0.5
"""


class TestParse:
    def test_single_joint_identity_frames(self):
        skeleton, motion = parse_bvh(SINGLE_JOINT_BVH)
        assert skeleton.num_joints == 1
        assert skeleton.joints[0].name == "hip"
        assert motion.num_frames == 2
        assert np.all(motion.frames == 0.0)
        assert np.allclose(skeleton.joints[0].end_site, [0.0, 1.0, 0.0])

    def test_chain_values_exact(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        assert skeleton.names == ["a", "b", "c"]
        assert skeleton.parents == [None, 0, 1]
        assert [j.rot_order for j in skeleton.joints] == ["ZYX", "ZXY", "XYZ"]
        expected_row0 = [1.5, 2.25, -0.75, 10.0, 20.0, 30.0, -15.0, 5.0, 0.0, 45.0, -30.0, 12.5]
        assert motion.frames[0].tolist() == expected_row0
        assert motion.frames[2, 0] == -2.0
        assert motion.frames[2, -1] == -0.5
        assert motion.frame_time == 0.05

    def test_mixamo_scale_joint_count(self):
        # 65-joint deep chain exercises document-order indexing at scale
        names = [f"j{i}" for i in range(65)]
        lines = ["HIERARCHY"]
        for depth, name in enumerate(names):
            pad = "\t" * depth
            kind = "ROOT" if depth == 0 else "JOINT"
            lines.append(f"{pad}{kind} {name}")
            lines.append(f"{pad}{{")
            lines.append(f"{pad}\tOFFSET 0.0 1.0 0.0")
            if depth == 0:
                lines.append(
                    f"{pad}\tCHANNELS 6 Xposition Yposition Zposition "
                    "Zrotation Xrotation Yrotation"
                )
            else:
                lines.append(f"{pad}\tCHANNELS 3 Zrotation Xrotation Yrotation")
        lines.append("\t" * 65 + "End Site")
        lines.append("\t" * 65 + "{")
        lines.append("\t" * 65 + "\tOFFSET 0.0 1.0 0.0")
        lines.append("\t" * 65 + "}")
        for depth in range(64, -1, -1):
            lines.append("\t" * depth + "}")
        per_frame = 3 + 3 * 65
        lines += ["MOTION", "Frames: 2", "Frame Time: 0.0333333"]
        lines += [" ".join(["0.0"] * per_frame)] * 2
        skeleton, motion = parse_bvh("\n".join(lines))
        assert skeleton.num_joints == 65
        assert motion.frames.shape == (2, per_frame)

    def test_malformed_header(self):
        with pytest.raises(BvhError, match="HIERARCHY"):
            parse_bvh("NOTBVH\nROOT a\n")

    def test_frame_count_mismatch_reports_line(self):
        bad = SINGLE_JOINT_BVH.replace("Frames: 2", "Frames: 5")
        with pytest.raises(BvhError, match="expected 5 frames"):
            parse_bvh(bad)

    def test_non_numeric_motion_data(self):
        bad = SINGLE_JOINT_BVH.replace("0 0 0 0 0 0\n0 0 0 0 0 0", "0 0 0 0 0 oops\n0 0 0 0 0 0")
        with pytest.raises(BvhError, match="non-numeric"):
            parse_bvh(bad)

    def test_unsupported_rotation_order(self):
        bad = SINGLE_JOINT_BVH.replace(
            "Zrotation Yrotation Xrotation", "Yrotation Xrotation Zrotation"
        )
        with pytest.raises(BvhError, match="YXZ"):
            parse_bvh(bad)


class TestWrite:
    def test_round_trip_chain(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        text = write_bvh(skeleton, motion)
        skeleton2, motion2 = parse_bvh(text)
        assert skeleton2.names == skeleton.names
        assert np.array_equal(skeleton2.offsets, skeleton.offsets)
        assert np.abs(motion2.frames - motion.frames).max() < 1e-4
        assert motion2.num_frames == motion.num_frames

    def test_round_trip_exact_values(self):
        # round-trip formatting preserves the parsed decimals bit-faithfully
        skeleton, motion = parse_bvh(CHAIN_BVH)
        _, motion2 = parse_bvh(write_bvh(skeleton, motion))
        assert np.array_equal(motion2.frames, motion.frames)

    def test_round_trip_90_degree_rotations(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        frames = motion.frames.copy()
        frames[:, 3:] = 90.0
        motion90 = RawMotion(frame_time=motion.frame_time, frames=frames)
        _, motion2 = parse_bvh(write_bvh(skeleton, motion90))
        assert np.abs(motion2.frames - frames).max() < 1e-4

    def test_round_trip_toy_corpus(self, toy_skeleton):
        for kind in ("sway", "twist"):
            motion = make_toy_motion(kind, frames=40)
            text = write_bvh(toy_skeleton, motion)
            skeleton2, motion2 = parse_bvh(text)
            assert skeleton2.names == toy_skeleton.names
            assert np.array_equal(skeleton2.offsets, toy_skeleton.offsets)
            assert np.abs(motion2.frames - motion.frames).max() < 1e-4

    def test_layout_mismatch(self, toy_skeleton):
        motion = RawMotion(frame_time=0.05, frames=np.zeros((4, 9)))
        with pytest.raises(BvhError, match="channels per frame"):
            write_bvh(toy_skeleton, motion)

    def test_empty_frames_rejected(self):
        with pytest.raises(BvhError, match="at least 2 frames"):
            RawMotion(frame_time=0.05, frames=np.zeros((1, 6)))


class TestSelectJoints:
    def test_keep_all_is_identity(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        skeleton2, motion2 = select_joints(skeleton, motion, set(skeleton.names))
        assert skeleton2.names == skeleton.names
        assert np.array_equal(motion2.frames, motion.frames)

    def test_drop_middle_offsets_accumulate(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        skeleton2, _ = select_joints(skeleton, motion, {"a", "c"})
        assert skeleton2.names == ["a", "c"]
        assert skeleton2.parents == [None, 0]
        # offset of c = offset(b) + offset(c)
        assert np.allclose(skeleton2.joints[1].offset, [0.0, 3.0, 0.0])

    def test_drop_middle_rotation_composes(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        _, motion2 = select_joints(skeleton, motion, {"a", "c"})
        # world orientation of c must be preserved exactly for arbitrary poses
        for t in range(motion.num_frames):
            full = (
                euler_to_matrices(motion.joint_eulers(1)[t], "ZXY")
                @ euler_to_matrices(motion.joint_eulers(2)[t], "XYZ")
            )
            reduced = euler_to_matrices(motion2.frames[t, 6:9], "XYZ")
            assert np.abs(full - reduced).max() < 1e-9

    def test_fk_positions_preserved_with_identity_intermediates(self):
        # FK oracle: kept joints keep world positions when dropped joints are
        # (near) identity, for arbitrary poses of the kept joints
        skeleton, motion = parse_bvh(CHAIN_BVH)
        rng = np.random.default_rng(7)
        frames = motion.frames.copy()
        frames[:, 3:6] = rng.uniform(-80, 80, size=(3, 3))  # root free
        frames[:, 6:9] = 0.0  # middle joint identity
        frames[:, 9:12] = rng.uniform(-80, 80, size=(3, 3))  # leaf free
        posed = RawMotion(frame_time=motion.frame_time, frames=frames)

        skeleton2, posed2 = select_joints(skeleton, posed, {"a", "c"})
        before = forward_kinematics(
            skeleton, raw_motion_rotations(skeleton, posed), posed.root_positions()
        )
        after = forward_kinematics(
            skeleton2, raw_motion_rotations(skeleton2, posed2), posed2.root_positions()
        )
        kept = [0, 2]
        assert np.abs(before[:, kept] - after).max() < 1e-5

    def test_toy_skeleton_subset_fk(self):
        # drop the hips: feet re-parent to pelvis with composed rotations
        skeleton = make_toy_skeleton()
        motion = make_toy_motion("sway", frames=30)
        frames = motion.frames.copy()
        frames[:, 3 + 3 * 4 : 6 + 3 * 4] = 0.0  # left_hip identity
        frames[:, 3 + 3 * 6 : 6 + 3 * 6] = 0.0  # right_hip identity
        posed = RawMotion(frame_time=motion.frame_time, frames=frames)
        keep = {"pelvis", "spine", "left_wrist", "right_wrist", "left_foot", "right_foot"}
        skeleton2, posed2 = select_joints(skeleton, posed, keep)
        assert skeleton2.num_joints == 6
        before = forward_kinematics(
            skeleton, raw_motion_rotations(skeleton, posed), posed.root_positions()
        )
        after = forward_kinematics(
            skeleton2, raw_motion_rotations(skeleton2, posed2), posed2.root_positions()
        )
        kept_old = [skeleton.index_of(n) for n in skeleton2.names]
        assert np.abs(before[:, kept_old] - after).max() < 1e-5
        # foot-joint indices remap with the reduction
        assert {skeleton2.names[i] for i in skeleton2.foot_joints} == {
            "left_foot",
            "right_foot",
        }

    def test_root_must_be_kept(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        with pytest.raises(BvhError, match="root"):
            select_joints(skeleton, motion, {"b", "c"})

    def test_unknown_names_rejected(self):
        skeleton, motion = parse_bvh(CHAIN_BVH)
        with pytest.raises(BvhError, match="unknown"):
            select_joints(skeleton, motion, {"a", "nope"})


class TestResample:
    @staticmethod
    def _motion(fps: float, frames: int) -> RawMotion:
        data = np.arange(frames, dtype=float)[:, None] * np.ones((1, 6))
        return RawMotion(frame_time=1.0 / fps, frames=data)

    def test_integer_decimation_60_to_30(self):
        out = resample(self._motion(60.0, 100), 30.0)
        assert out.num_frames == 50
        assert out.frame_time == pytest.approx(1.0 / 30.0)
        assert np.array_equal(out.frames[:, 0], np.arange(0, 100, 2))

    def test_120_to_30_keeps_every_fourth(self):
        out = resample(self._motion(120.0, 40), 30.0)
        assert np.array_equal(out.frames[:, 0], np.arange(0, 40, 4))

    def test_fractional_ratio_matches_bruteforce(self):
        # oracle: collect round(k * 50/30) until the source runs out
        src_frames = 50
        out = resample(self._motion(50.0, src_frames), 30.0)
        expected = []
        k = 0
        while True:
            idx = int(round(k * 50.0 / 30.0))
            if idx > src_frames - 1:
                break
            expected.append(idx)
            k += 1
        assert out.frames[:, 0].astype(int).tolist() == expected

    def test_same_fps_is_identity_and_idempotent(self):
        motion = self._motion(30.0, 25)
        once = resample(motion, 30.0)
        twice = resample(once, 30.0)
        assert np.array_equal(once.frames, motion.frames)
        assert np.array_equal(twice.frames, once.frames)

    def test_upsampling_rejected(self):
        with pytest.raises(BvhError, match="upsampling"):
            resample(self._motion(30.0, 10), 60.0)


class TestTrim:
    def test_full_range_is_identity(self):
        motion = RawMotion(frame_time=0.05, frames=np.random.default_rng(0).normal(size=(20, 6)))
        out = trim(motion, 0, 20)
        assert np.array_equal(out.frames, motion.frames)

    def test_frames_copied_verbatim(self):
        motion = RawMotion(frame_time=0.05, frames=np.arange(120).reshape(20, 6).astype(float))
        out = trim(motion, 10, 20)
        assert out.num_frames == 10
        assert np.array_equal(out.frames[0], motion.frames[10])

    def test_long_clip_trim(self):
        motion = RawMotion(frame_time=1 / 30, frames=np.zeros((900, 6)))
        assert trim(motion, 100, 460).num_frames == 360

    def test_out_of_range(self):
        motion = RawMotion(frame_time=0.05, frames=np.zeros((10, 6)))
        with pytest.raises(BvhError):
            trim(motion, 5, 11)
        with pytest.raises(BvhError):
            trim(motion, 7, 7)


def test_parse_name_list():
    text = "# comment\nHips\n\n  Spine  \n# another\nHead\n"
    assert parse_name_list(text) == ["Hips", "Spine", "Head"]


def test_default_keep_list_has_24_names():
    from motionblend.bvh import default_mixamo_keep_list

    names = default_mixamo_keep_list()
    assert len(names) == 24
    assert names[0] == "Hips"
