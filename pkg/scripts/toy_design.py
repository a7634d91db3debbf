"""Offline calibration of candidate toy motions: window-metric self-threshold,
cross-motion separation, and the upsampling residual the final stage must fix."""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from motionblend.bvh import RawMotion
from motionblend.metrics import ChannelStats, real_to_real_threshold, window_features, window_distances
from motionblend.representation import encode_motion, resample_array, temporal_resample
from conftest import make_toy_skeleton

FPS = 30.0
T = 120


def _chirp(t, f0, f1):
    dur = t[-1] if t[-1] > 0 else 1.0
    return 2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * dur))


def candidate_motion(kind: str, frames=T, fps=FPS) -> RawMotion:
    t = np.arange(frames) / fps
    ch = np.zeros((frames, 3 + 3 * 8))

    def set_euler(joint, col, values):
        ch[:, 3 + 3 * joint + col] = values

    if kind == "sway":
        phase = _chirp(t, 0.9, 1.6)
        env = 0.5 * (1 + np.sin(2 * np.pi * 0.22 * t - np.pi / 2))  # slow ramp
        ch[:, 0] = 0.5 * t + 0.08 * np.sin(phase / 2)
        ch[:, 1] = 1.0 + 0.06 * np.sin(phase) + 0.04 * env
        set_euler(1, 0, 8.0 * np.sin(phase) + 10.0 * env)  # spine Z drifts
        set_euler(2, 0, (20.0 + 35.0 * env) * np.sin(phase))  # left wrist X
        set_euler(3, 0, -(20.0 + 35.0 * env) * np.sin(phase))  # right wrist X
        set_euler(4, 1, 25.0 * (1.2 - env) * np.sin(phase))  # left hip X
        set_euler(6, 1, -25.0 * (1.2 - env) * np.sin(phase))  # right hip X
        # high-frequency detail the coarse levels cannot carry
        hf = np.sin(2 * np.pi * 9.0 * t)
        set_euler(2, 2, 12.0 * hf * (0.4 + 0.6 * env))
        set_euler(3, 2, -12.0 * hf * (0.4 + 0.6 * env))
        set_euler(5, 1, 8.0 * np.sin(2 * np.pi * 8.3 * t))
    elif kind == "twist":
        phase = _chirp(t, 0.30, 0.62)
        env = np.clip(1.6 * t / t[-1] - 0.3, 0.0, 1.0)  # second-half activation
        ch[:, 2] = 0.4 * t
        ch[:, 1] = 1.0 + 0.12 * np.sin(0.9 * phase) - 0.05 * env
        set_euler(0, 1, (25.0 + 35.0 * env) * np.sin(phase))  # pelvis twist grows
        set_euler(1, 1, -18.0 * np.sin(phase))
        set_euler(2, 2, 65.0 + 25.0 * np.sin(2.3 * phase) * (1 - 0.5 * env))
        set_euler(3, 2, -65.0 - 25.0 * np.sin(2.3 * phase) * (1 - 0.5 * env))
        set_euler(4, 1, 20.0 * env * np.sin(2.0 * phase))  # hip kicks late
        set_euler(6, 1, -20.0 * env * np.sin(2.0 * phase + 0.8))
        hf = np.sin(2 * np.pi * 8.1 * t)
        set_euler(7, 1, 9.0 * hf)
        set_euler(5, 0, 7.0 * np.sin(2 * np.pi * 7.6 * t + 0.5))
        set_euler(2, 0, 8.0 * np.sin(2 * np.pi * 9.4 * t) * env)
    else:
        raise ValueError(kind)
    return RawMotion(frame_time=1.0 / fps, frames=ch)


skeleton = make_toy_skeleton()
tensors = [encode_motion(skeleton, candidate_motion(k)) for k in ("sway", "twist")]
stats = ChannelStats.fit(tensors)
print("std floor:", stats.std.min(), "mean std:", stats.std.mean())

for name, tensor in zip(("sway", "twist"), tensors):
    ws = window_features(tensor, 30, stats).windows
    tau = real_to_real_threshold(ws, 30)
    # calibration: distance for uniform per-channel offsets
    for eps in (0.01, 0.02, 0.05):
        d = np.sqrt(((eps / stats.std) ** 2).sum())
        print(f"[{name}] tau={tau:.3f}  d(eps={eps})={d:.3f}")
    # level-3 -> level-4 upsampling residual (what stage 7 must add back)
    down = temporal_resample(tensor, 90)
    up = resample_array(down.data, 120)
    resid = np.abs(up - tensor.data).mean()
    rms = np.sqrt(((up - tensor.data) ** 2).mean())
    print(f"[{name}] upsample 90->120 residual: L1={resid:.4f} rms={rms:.4f}")

wa = window_features(tensors[0], 30, stats).windows
wb = window_features(tensors[1], 30, stats).windows
cross = window_distances(wa, wb).mean()
print(f"cross-motion mean window distance: {cross:.3f}")
