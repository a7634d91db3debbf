"""Blend schedules and single-pass blended generation.

A schedule is an ordered list of (identity, frame_count) segments; it turns
into a piecewise-constant identity map that drives one full generative pass.
Identity switches are hard one-hot transitions; the root trajectory stays
continuous because decoding integrates planar velocities.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import RawMotion, Skeleton
from .pyramid import PyramidModel, generate_full
from .representation import MotionTensor, decode_motion
from .skeleton_nn import SkeletonIdMap


@dataclass(frozen=True)
class BlendSchedule:
    """Ordered (identity name, frame count) segments."""

    segments: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a schedule needs at least one segment")
        for name, count in self.segments:
            if count < 1:
                raise ValueError(f"segment {name!r} has zero-length frame count")

    @property
    def total_frames(self) -> int:
        return sum(count for _, count in self.segments)

    def describe(self) -> str:
        parts = [f"{name} x {count}" for name, count in self.segments]
        return " -> ".join(parts) + f"  ({self.total_frames} frames)"

    @staticmethod
    def constant(identity: str, frames: int) -> "BlendSchedule":
        return BlendSchedule(((identity, frames),))

    @staticmethod
    def halves(first: str, second: str, total_frames: int) -> "BlendSchedule":
        half = total_frames // 2
        return BlendSchedule(((first, half), (second, total_frames - half)))


def parse_schedule(text: str) -> BlendSchedule:
    """Parse `identity=frames` lines (blank lines / '#' comments ignored)."""
    segments = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"schedule line {lineno}: expected identity=frames, got {line!r}")
        name, _, frames = line.partition("=")
        try:
            count = int(frames.strip())
        except ValueError:
            raise ValueError(
                f"schedule line {lineno}: frame count {frames.strip()!r} is not an integer"
            ) from None
        segments.append((name.strip(), count))
    return BlendSchedule(tuple(segments))


def load_schedule(path: str | Path) -> BlendSchedule:
    return parse_schedule(Path(path).read_text())


def make_id_map(schedule: BlendSchedule, model: PyramidModel) -> SkeletonIdMap:
    """Piecewise-constant identity map of the schedule's exact length."""
    labels = np.empty(schedule.total_frames, dtype=np.int64)
    cursor = 0
    for name, count in schedule.segments:
        labels[cursor : cursor + count] = model.identity_index(name)
        cursor += count
    return SkeletonIdMap(labels, model.num_identities)


def blend(
    model: PyramidModel,
    schedule: BlendSchedule,
    seed: int,
    skeleton: Skeleton | None = None,
    initial_root_xz: tuple[float, float] = (0.0, 0.0),
) -> tuple[MotionTensor, RawMotion]:
    """Generate the scheduled blend in a single pass and decode it.

    No post-processing smoothing is applied; the output length equals the
    schedule length exactly.
    """
    skeleton = skeleton if skeleton is not None else model.skeleton
    id_map = make_id_map(schedule, model)
    total = schedule.total_frames
    trace = generate_full(
        model,
        id_map,
        seed=seed,
        mode="random",
        total_frames=None if total == model.level_spec.total_frames else total,
    )
    raw = decode_motion(trace.final, skeleton, initial_root_xz)
    return trace.final, raw
