"""Model evaluation protocol: draw scheduled generations, compute the full
metric table, and probe blend smoothness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blending import BlendSchedule, make_id_map
from .metrics import (
    DEFAULT_FID_COMPONENTS,
    DEFAULT_LOCAL_WINDOW,
    DEFAULT_WINDOW,
    ChannelStats,
    SmoothnessSeries,
    WindowFeatureSet,
    coverage,
    diversity,
    fid,
    pooled_windows,
    smoothness,
    window_features,
)
from .pyramid import PyramidModel, generate_full
from .representation import MotionTensor

DEFAULT_NUM_SAMPLES = 50
TRANSITION_HALF_WIDTH = 15  # frames around a blend boundary


def evaluation_schedules(model: PyramidModel) -> list[BlendSchedule]:
    """The cycling schedule set: each identity held constant, then half/half
    blends of consecutive identity pairs."""
    T = model.level_spec.total_frames
    names = model.identities
    schedules = [BlendSchedule.constant(n, T) for n in names]
    if len(names) >= 2:
        for i, first in enumerate(names):
            second = names[(i + 1) % len(names)]
            schedules.append(BlendSchedule.halves(first, second, T))
    return schedules


def generate_samples(
    model: PyramidModel, num_samples: int, seed: int
) -> list[MotionTensor]:
    """Deterministic random-mode generations under the cycling schedules."""
    schedules = evaluation_schedules(model)
    samples = []
    for k in range(num_samples):
        schedule = schedules[k % len(schedules)]
        id_map = make_id_map(schedule, model)
        trace = generate_full(model, id_map, seed=seed + k, mode="random")
        samples.append(trace.final)
    return samples


@dataclass
class EvalOptions:
    window: int = DEFAULT_WINDOW
    local_window: int = DEFAULT_LOCAL_WINDOW
    num_samples: int = DEFAULT_NUM_SAMPLES
    fid_components: int = DEFAULT_FID_COMPONENTS
    seed: int = 0


def compute_metrics(
    reals: list[MotionTensor],
    samples: list[MotionTensor],
    options: EvalOptions,
) -> dict:
    """The six-column metric report over real motions and generated samples."""
    stats = ChannelStats.fit(reals)
    real_pool = pooled_windows(reals, options.window, stats)
    gen_pool = pooled_windows(samples, options.window, stats)

    report: dict = {}
    report["fid"] = fid(
        WindowFeatureSet(real_pool), WindowFeatureSet(gen_pool), options.fid_components
    )
    report["cov"] = float(
        np.mean(
            [coverage(r, samples, window=options.window, stats=stats) for r in reals]
        )
    )
    report["gdiv"] = diversity(reals, samples, "global", window=options.window, stats=stats)
    report["ldiv"] = diversity(
        reals, samples, "local", local_window=options.local_window, stats=stats
    )
    if len(samples) >= 2:
        report["inter_div"] = diversity(reals, samples, "inter", window=options.window, stats=stats)
        report["intra_div"] = diversity(reals, samples, "intra", window=options.window, stats=stats)
    else:
        report["inter_div"] = "unavailable"
        report["intra_div"] = "unavailable"
    return report


def blend_smoothness_probe(
    model: PyramidModel,
    seed: int,
    probe_joints: list[str] | None = None,
) -> SmoothnessSeries | None:
    """Smoothness series for one half/half blend of the first two identities,
    with the transition window annotated (constant schedule when only one
    identity exists)."""
    T = model.level_spec.total_frames
    names = model.identities
    if len(names) >= 2:
        schedule = BlendSchedule.halves(names[0], names[1], T)
        boundary = schedule.segments[0][1]
        window = (
            max(boundary - TRANSITION_HALF_WIDTH, 0),
            min(boundary + TRANSITION_HALF_WIDTH, T - 1),
        )
    else:
        schedule = BlendSchedule.constant(names[0], T)
        window = None
    id_map = make_id_map(schedule, model)
    trace = generate_full(model, id_map, seed=seed, mode="random")
    return smoothness(
        trace.final, model.skeleton, probe_joints=probe_joints, transition_window=window
    )


def sample_distance(
    a: MotionTensor, b: MotionTensor, stats: ChannelStats, window: int = DEFAULT_WINDOW
) -> float:
    """Window-metric distance between two same-length samples: mean distance
    over aligned standardized windows."""
    wa = window_features(a, window, stats).windows
    wb = window_features(b, window, stats).windows
    n = min(wa.shape[0], wb.shape[0])
    return float(np.linalg.norm(wa[:n] - wb[:n], axis=-1).mean())
