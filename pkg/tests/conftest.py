"""Shared fixtures: a small biped skeleton and synthetic motion clips."""

from __future__ import annotations

import numpy as np
import pytest

from motionblend.bvh import Joint, RawMotion, Skeleton

TOY_FPS = 30.0


def make_toy_skeleton() -> Skeleton:
    """8-joint biped with the five standard probe joints and two feet."""
    joints = (
        Joint("pelvis", None, np.array([0.0, 0.0, 0.0]), "ZYX"),
        Joint("spine", 0, np.array([0.0, 0.5, 0.0]), "ZXY"),
        Joint("left_wrist", 1, np.array([0.6, 0.1, 0.0]), "XYZ",
              end_site=np.array([0.15, 0.0, 0.0])),
        Joint("right_wrist", 1, np.array([-0.6, 0.1, 0.0]), "XYZ",
              end_site=np.array([-0.15, 0.0, 0.0])),
        Joint("left_hip", 0, np.array([0.2, -0.1, 0.0]), "ZXY"),
        Joint("left_foot", 4, np.array([0.0, -0.8, 0.0]), "ZXY",
              end_site=np.array([0.0, -0.1, 0.12])),
        Joint("right_hip", 0, np.array([-0.2, -0.1, 0.0]), "ZXY"),
        Joint("right_foot", 6, np.array([0.0, -0.8, 0.0]), "ZXY",
              end_site=np.array([0.0, -0.1, 0.12])),
    )
    skeleton = Skeleton(joints=joints)
    return skeleton.with_foot_joints(["left_foot", "right_foot"])


def _chirp(t: np.ndarray, f0: float, f1: float) -> np.ndarray:
    """Phase of a linear chirp from f0 to f1 Hz over t (seconds)."""
    duration = t[-1] if t[-1] > 0 else 1.0
    return 2.0 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2.0 * duration))


def make_toy_motion(kind: str, frames: int = 120, fps: float = TOY_FPS) -> RawMotion:
    """Two analytically distinct clips on the toy skeleton.

    'sway':  walk-like arm/hip swings advancing along x, arm amplitude rising
             and falling over the clip, with a 9 Hz wrist flutter.
    'twist': slow torso twists advancing along z, hip kicks joining in the
             second half, with ~8 Hz foot/wrist tremor.

    The slow envelopes keep windows from repeating within a clip and the
    high-frequency detail lives above what the coarse pyramid levels carry.
    """
    t = np.arange(frames) / fps
    channels = np.zeros((frames, 3 + 3 * 8))

    def set_euler(joint: int, col: int, values: np.ndarray):
        channels[:, 3 + 3 * joint + col] = values

    if kind == "sway":
        phase = _chirp(t, 0.9, 1.6)
        env = 0.5 * (1 + np.sin(2 * np.pi * 0.22 * t - np.pi / 2))
        channels[:, 0] = 0.5 * t + 0.08 * np.sin(phase / 2)  # root x
        channels[:, 1] = 1.0 + 0.06 * np.sin(phase) + 0.04 * env
        set_euler(1, 0, 8.0 * np.sin(phase) + 10.0 * env)  # spine Z drift
        set_euler(2, 0, (20.0 + 35.0 * env) * np.sin(phase))  # left wrist X
        set_euler(3, 0, -(20.0 + 35.0 * env) * np.sin(phase))  # right wrist X
        set_euler(4, 1, 25.0 * (1.2 - env) * np.sin(phase))  # left hip X
        set_euler(6, 1, -25.0 * (1.2 - env) * np.sin(phase))  # right hip X
        hf = np.sin(2 * np.pi * 9.0 * t)
        set_euler(2, 2, 12.0 * hf * (0.4 + 0.6 * env))
        set_euler(3, 2, -12.0 * hf * (0.4 + 0.6 * env))
        set_euler(5, 1, 8.0 * np.sin(2 * np.pi * 8.3 * t))
    elif kind == "twist":
        phase = _chirp(t, 0.30, 0.62)
        env = np.clip(1.6 * t / max(t[-1], 1e-9) - 0.3, 0.0, 1.0)
        channels[:, 2] = 0.4 * t  # root z
        channels[:, 1] = 1.0 + 0.12 * np.sin(0.9 * phase) - 0.05 * env
        set_euler(0, 1, (25.0 + 35.0 * env) * np.sin(phase))  # pelvis Y twist
        set_euler(1, 1, -18.0 * np.sin(phase))  # spine X counter-twist
        set_euler(2, 2, 65.0 + 25.0 * np.sin(2.3 * phase) * (1 - 0.5 * env))
        set_euler(3, 2, -65.0 - 25.0 * np.sin(2.3 * phase) * (1 - 0.5 * env))
        set_euler(4, 1, 20.0 * env * np.sin(2.0 * phase))  # hip kicks join late
        set_euler(6, 1, -20.0 * env * np.sin(2.0 * phase + 0.8))
        set_euler(7, 1, 9.0 * np.sin(2 * np.pi * 8.1 * t))
        set_euler(5, 0, 7.0 * np.sin(2 * np.pi * 7.6 * t + 0.5))
        set_euler(2, 0, 8.0 * np.sin(2 * np.pi * 9.4 * t) * env)
    else:
        raise ValueError(f"unknown toy motion kind {kind!r}")
    return RawMotion(frame_time=1.0 / fps, frames=channels)


@pytest.fixture(scope="session")
def toy_skeleton() -> Skeleton:
    return make_toy_skeleton()


@pytest.fixture(scope="session")
def sway_motion() -> RawMotion:
    return make_toy_motion("sway")


@pytest.fixture(scope="session")
def twist_motion() -> RawMotion:
    return make_toy_motion("twist")
