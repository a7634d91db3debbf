"""Desk-scale probe: train conditioned + unconditioned models on the toy
pair and print every acceptance-relevant quantity."""

import csv
import sys
import time
from pathlib import Path

import numpy as np
import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import make_toy_motion, make_toy_skeleton

from motionblend.blending import BlendSchedule, make_id_map
from motionblend.evaluation import (
    EvalOptions,
    blend_smoothness_probe,
    compute_metrics,
    generate_samples,
    sample_distance,
)
from motionblend.metrics import (
    ChannelStats,
    coverage,
    real_to_real_threshold,
    window_distances,
    window_features,
)
from motionblend.pyramid import generate_full
from motionblend.representation import encode_motion
from motionblend.skeleton_nn import SkeletonIdMap
from motionblend.training import TrainConfig, train

ITERS = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
LR = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-4

def run(modulation, tag):
    skeleton = make_toy_skeleton()
    motions = [encode_motion(skeleton, make_toy_motion(k, frames=120)) for k in ("sway", "twist")]
    config = TrainConfig(
        identities=["sway", "twist"],
        iterations_per_level=ITERS,
        learning_rate=LR,
        seed=0,
        modulation=modulation,
    )
    tele = Path(f"/tmp/probe_{tag}.csv")
    t0 = time.time()
    model = train(config, motions, skeleton, telemetry_path=tele)
    print(f"[{tag}] trained in {time.time()-t0:.0f}s")

    rows = list(csv.DictReader(tele.open()))
    final = [r for r in rows if r["stage"] == "7"]
    recs = np.array([float(r["gen_rec"]) for r in final])
    k = 25
    smooth = np.convolve(recs, np.ones(k) / k, mode="valid")
    at50 = smooth[min(50, len(smooth) - 1)]
    end = smooth[-1]
    print(f"[{tag}] stage7 rec: smoothed@50={at50:.4f} end={end:.4f} ratio={at50/end:.2f}")

    stats = ChannelStats.fit(motions)
    T = 120

    # (b) reconstruction coverage
    recons = []
    for b in range(2):
        ids = SkeletonIdMap.constant(b, T, 2)
        recons.append(generate_full(model, ids, seed=0, mode="reconstruction", recon_index=b).final)
    covs = [coverage(motions[b], recons, stats=stats) for b in range(2)]
    print(f"[{tag}] recon coverage: {covs} (mean {np.mean(covs):.3f})")
    for b in range(2):
        err = np.abs(recons[b].data - motions[b].data).mean()
        real_w = window_features(motions[b], 30, stats).windows
        gen_w = np.concatenate([window_features(r, 30, stats).windows for r in recons])
        tau = real_to_real_threshold(real_w, 30)
        nearest = window_distances(real_w, gen_w).min(axis=1)
        print(
            f"[{tag}] recon L1 vs real[{b}]: {err:.4f}  tau={tau:.3f} "
            f"nearest med={np.median(nearest):.3f} p95={np.percentile(nearest,95):.3f}"
        )

    # eval-protocol coverage (for the ablation)
    samples = generate_samples(model, 24, seed=100)
    cov_eval = float(np.mean([coverage(m, samples, stats=stats) for m in motions]))
    print(f"[{tag}] eval-protocol coverage (24 samples): {cov_eval:.3f}")

    # (c) blend smoothness
    series = blend_smoothness_probe(model, seed=5)
    dv = series.velocity_change
    lo, hi = series.transition_window
    inside = dv[lo : hi + 1]
    outside = np.concatenate([dv[:lo], dv[hi + 1 :]])
    ratio = np.median(inside) / max(np.median(outside), 1e-9)
    print(f"[{tag}] blend dv: med inside={np.median(inside):.4f} outside={np.median(outside):.4f} ratio={ratio:.2f}")

    # (d) distinguishability
    def gen(b, seed):
        ids = SkeletonIdMap.constant(b, T, 2)
        return generate_full(model, ids, seed=seed, mode="random").final

    cross = np.mean([sample_distance(gen(0, s), gen(1, s), stats) for s in (1, 2, 3)])
    same = np.mean(
        [sample_distance(gen(b, 1), gen(b, 2), stats) for b in (0, 1)]
        + [sample_distance(gen(b, 2), gen(b, 3), stats) for b in (0, 1)]
    )
    print(f"[{tag}] distance cross={cross:.4f} same-reseed={same:.4f} ratio={cross/max(same,1e-9):.2f}")
    return model, cov_eval


cond_model, cov_cond = run("spade", "cond")
uncond_model, cov_uncond = run("none", "uncond")
print(f"ablation coverage gap: {cov_cond:.3f} - {cov_uncond:.3f} = {cov_cond - cov_uncond:.3f}")
