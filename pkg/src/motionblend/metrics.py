"""Quantitative evaluation of generated motion.

Window metrics (FID, coverage, diversity) operate on sliding windows of the
rotation+root channels, standardized per dimension with statistics fit on
the real set.  Smoothness probes report per-joint velocity and acceleration
changes from forward-kinematic joint trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvh import Skeleton
from .representation import (
    ROTATION_DIMS,
    MotionTensor,
    forward_kinematics,
    rotation_from_6d,
)

DEFAULT_WINDOW = 30  # frames, at 30 fps
DEFAULT_LOCAL_WINDOW = 8
DEFAULT_FID_COMPONENTS = 64
COVERAGE_PERCENTILE = 95.0
COVARIANCE_LOADING = 1e-6

PROBE_ALIASES = {
    "pelvis": ("pelvis", "hips", "hip", "root"),
    "left_wrist": ("leftwrist", "lefthand", "lwrist", "lhand"),
    "right_wrist": ("rightwrist", "righthand", "rwrist", "rhand"),
    "left_foot": ("leftfoot", "lfoot", "leftankle"),
    "right_foot": ("rightfoot", "rfoot", "rightankle"),
}


def feature_channels(tensor: MotionTensor) -> np.ndarray:
    """Rotation + root channels (contacts excluded), (T, D')."""
    rot = tensor.data[:, : ROTATION_DIMS * tensor.num_joints]
    return np.concatenate([rot, tensor.root_block], axis=1)


@dataclass(frozen=True)
class ChannelStats:
    """Per-dimension standardization statistics fit on the real set."""

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(motions: list[MotionTensor]) -> "ChannelStats":
        stacked = np.concatenate([feature_channels(m) for m in motions], axis=0)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        # floor relative to the overall scale so channels that are constant
        # in the real set cannot dominate distances to generated data
        floor = max(0.05 * float(std.mean()), 1e-8)
        return ChannelStats(mean=mean, std=np.maximum(std, floor))

    def apply(self, channels: np.ndarray) -> np.ndarray:
        return (channels - self.mean) / self.std


@dataclass
class WindowFeatureSet:
    """Standardized sliding windows (stride 1): (N, W, D')."""

    windows: np.ndarray

    def __post_init__(self):
        if self.windows.ndim != 3:
            raise ValueError("windows must have shape (N, W, D')")

    @property
    def count(self) -> int:
        return self.windows.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.windows.reshape(self.count, -1)


def window_features(
    motion: MotionTensor, window: int, stats: ChannelStats
) -> WindowFeatureSet:
    channels = stats.apply(feature_channels(motion))
    T = channels.shape[0]
    if T < window:
        raise ValueError(f"motion of {T} frames is shorter than the window {window}")
    idx = np.arange(T - window + 1)[:, None] + np.arange(window)[None, :]
    return WindowFeatureSet(windows=channels[idx])


def _as_list(motions) -> list[MotionTensor]:
    return list(motions) if isinstance(motions, (list, tuple)) else [motions]


def pooled_windows(motions, window: int, stats: ChannelStats) -> np.ndarray:
    sets = [window_features(m, window, stats).windows for m in _as_list(motions)]
    return np.concatenate(sets, axis=0)


def window_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise window metric: mean per-frame L2 over standardized channels.

    ``a``: (N1, W, D'), ``b``: (N2, W, D') -> (N1, N2).
    """
    diff = a[:, None] - b[None, :]  # (N1, N2, W, D')
    return np.linalg.norm(diff, axis=-1).mean(axis=-1)


def aligned_window_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean window distance between two samples' windows at equal starts."""
    n = min(a.shape[0], b.shape[0])
    diff = a[:n] - b[:n]
    return float(np.linalg.norm(diff, axis=-1).mean())


# ---------------------------------------------------------------------------
# Frechet distance


def _symmetric_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_gaussian(
    mu1: np.ndarray, cov1: np.ndarray, mu2: np.ndarray, cov2: np.ndarray
) -> float:
    """||mu1-mu2||^2 + tr(cov1 + cov2 - 2 (cov1 cov2)^(1/2)), stabilized via
    symmetric square roots with eigenvalue clamping at zero."""
    s1 = _symmetric_sqrt(cov1)
    inner = s1 @ cov2 @ s1
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr_sqrt = float(np.sqrt(vals).sum())
    value = float(np.sum((mu1 - mu2) ** 2) + np.trace(cov1) + np.trace(cov2) - 2.0 * tr_sqrt)
    return max(value, 0.0)


def _gaussian_moments(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = features.mean(axis=0)
    if features.shape[0] < 2:
        cov = np.zeros((features.shape[1], features.shape[1]))
    else:
        cov = np.cov(features, rowvar=False)
        cov = np.atleast_2d(cov)
    cov = cov + COVARIANCE_LOADING * np.eye(cov.shape[0])
    return mu, cov


def _pca_project(
    real_flat: np.ndarray, gen_flat: np.ndarray, components: int
) -> tuple[np.ndarray, np.ndarray]:
    # fit on the union of both sets so the metric is symmetric in its inputs
    pooled = np.concatenate([real_flat, gen_flat], axis=0)
    k = min(components, pooled.shape[1], max(pooled.shape[0] - 1, 1))
    center = pooled.mean(axis=0)
    xp = pooled - center
    cov = (xp.T @ xp) / max(xp.shape[0] - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    basis = vecs[:, ::-1][:, :k]
    return (real_flat - center) @ basis, (gen_flat - center) @ basis


def fid(
    real,
    generated,
    pca_components: int = DEFAULT_FID_COMPONENTS,
) -> float:
    """Single-sample Frechet distance between window-feature Gaussians.

    Accepts :class:`WindowFeatureSet` pairs (windows are flattened and
    PCA-reduced on the real set) or plain (N, d) feature arrays, which are
    used as-is.
    """
    if isinstance(real, WindowFeatureSet) and isinstance(generated, WindowFeatureSet):
        real_flat, gen_flat = real.flat, generated.flat
        if real_flat.shape[1] != gen_flat.shape[1]:
            raise ValueError("window descriptors must share a dimension")
        real_flat, gen_flat = _pca_project(real_flat, gen_flat, pca_components)
    else:
        real_flat = np.asarray(real, dtype=np.float64)
        gen_flat = np.asarray(generated, dtype=np.float64)
        if real_flat.ndim == 1:
            real_flat = real_flat[:, None]
        if gen_flat.ndim == 1:
            gen_flat = gen_flat[:, None]
    if real_flat.shape[0] < 2 or gen_flat.shape[0] < 2:
        raise ValueError("need at least 2 windows per set")
    mu_r, cov_r = _gaussian_moments(real_flat)
    mu_g, cov_g = _gaussian_moments(gen_flat)
    return frechet_gaussian(mu_r, cov_r, mu_g, cov_g)


# ---------------------------------------------------------------------------
# coverage


def real_to_real_threshold(real_windows: np.ndarray, window: int) -> float:
    """95th percentile of each real window's distance to its nearest
    non-overlapping real window."""
    n = real_windows.shape[0]
    if n < window + 1:
        raise ValueError(
            "not enough windows to find non-overlapping neighbors "
            f"(have {n}, need > {window})"
        )
    dist = window_distances(real_windows, real_windows)
    starts = np.arange(n)
    overlap = np.abs(starts[:, None] - starts[None, :]) < window
    dist[overlap] = np.inf
    nearest = dist.min(axis=1)
    return float(np.percentile(nearest, COVERAGE_PERCENTILE))


def coverage(
    real: MotionTensor,
    generated,
    window: int = DEFAULT_WINDOW,
    tau: float | None = None,
    stats: ChannelStats | None = None,
) -> float:
    """Fraction of real windows whose nearest generated window is within tau.

    ``tau`` defaults to the 95th percentile of real-to-real nearest
    non-overlapping-window distances.
    """
    generated = _as_list(generated)
    if not generated:
        raise ValueError("need at least one generated motion")
    if stats is None:
        stats = ChannelStats.fit([real])
    real_windows = window_features(real, window, stats).windows
    gen_windows = pooled_windows(generated, window, stats)
    if tau is None:
        tau = real_to_real_threshold(real_windows, window)
    nearest = window_distances(real_windows, gen_windows).min(axis=1)
    return float((nearest <= tau).mean())


# ---------------------------------------------------------------------------
# diversity

DIVERSITY_KINDS = ("global", "local", "inter", "intra")


def diversity(
    real,
    generated,
    kind: str,
    window: int = DEFAULT_WINDOW,
    local_window: int = DEFAULT_LOCAL_WINDOW,
    stats: ChannelStats | None = None,
) -> float:
    """Window-metric diversity variants.

    global/local: mean distance from generated windows to the nearest real
    window (local uses the short window).  inter: mean distance between
    distinct samples' aligned windows.  intra: mean pairwise distance among
    each sample's own windows, averaged over samples.
    """
    if kind not in DIVERSITY_KINDS:
        raise ValueError(f"unknown diversity kind {kind!r} (have {DIVERSITY_KINDS})")
    real_list, gen_list = _as_list(real), _as_list(generated)
    if stats is None:
        stats = ChannelStats.fit(real_list)

    # means are taken over sorted values so the result is exactly invariant
    # to the order of the generated samples
    if kind in ("global", "local"):
        W = window if kind == "global" else local_window
        real_windows = pooled_windows(real_list, W, stats)
        gen_windows = pooled_windows(gen_list, W, stats)
        nearest = window_distances(gen_windows, real_windows).min(axis=1)
        return float(np.sort(nearest).mean())

    if len(gen_list) < 2:
        raise ValueError(f"{kind} diversity needs at least 2 generated samples")
    per_sample = [window_features(m, window, stats).windows for m in gen_list]

    if kind == "inter":
        values = [
            aligned_window_distance(per_sample[i], per_sample[j])
            for i in range(len(per_sample))
            for j in range(i + 1, len(per_sample))
        ]
        return float(np.sort(values).mean())

    # intra: pairwise among each sample's windows, averaged over samples
    values = []
    for windows in per_sample:
        dist = window_distances(windows, windows)
        n = dist.shape[0]
        if n < 2:
            raise ValueError("intra diversity needs at least 2 windows per sample")
        triu = dist[np.triu_indices(n, k=1)]
        values.append(triu.mean())
    return float(np.sort(values).mean())


# ---------------------------------------------------------------------------
# smoothness probes


@dataclass
class SmoothnessSeries:
    """Per-joint |speed change| and |acceleration change| series."""

    joint_names: list[str]
    velocity_change: np.ndarray  # (T-2, P)
    acceleration_change: np.ndarray  # (T-3, P)
    transition_window: tuple[int, int] | None = None

    def __post_init__(self):
        if self.velocity_change.shape[0] != self.acceleration_change.shape[0] + 1:
            raise ValueError("series lengths must be T-2 and T-3")


def _normalize_name(name: str) -> str:
    return name.lower().replace("_", "").replace(" ", "")


def resolve_probe_joints(
    skeleton: Skeleton, names: list[str] | None = None
) -> dict[str, int]:
    """Map probe labels to joint indices; defaults to the five standard
    probes (pelvis, wrists, feet) resolved through common naming aliases."""
    if names is not None:
        return {name: skeleton.index_of(name) for name in names}
    normalized = {_normalize_name(j.name): i for i, j in enumerate(skeleton.joints)}
    resolved = {}
    for label, aliases in PROBE_ALIASES.items():
        for alias in aliases:
            if alias in normalized:
                resolved[label] = normalized[alias]
                break
        else:
            raise KeyError(
                f"cannot resolve probe joint {label!r} on this skeleton; "
                "pass probe joint names explicitly"
            )
    return resolved


def smoothness(
    motion: MotionTensor,
    skeleton: Skeleton,
    probe_joints: list[str] | None = None,
    transition_window: tuple[int, int] | None = None,
) -> SmoothnessSeries:
    """Velocity/acceleration-change probes from FK joint trajectories.

    Speeds are ||p_{t+1} - p_t|| * fps; the series report per-frame absolute
    changes of speed and of speed change.  Invariant to rigid translation.
    """
    if motion.num_frames < 4:
        raise ValueError("need at least 4 frames for smoothness probes")
    probes = resolve_probe_joints(skeleton, probe_joints)
    rotations = rotation_from_6d(motion.rotation_block.astype(np.float64))
    root = motion.root_block.astype(np.float64)
    T = motion.num_frames
    root_pos = np.zeros((T, 3))
    root_pos[:, 1] = root[:, 0]
    for k, axis in ((1, 0), (2, 2)):
        root_pos[1:, axis] = np.cumsum(root[:-1, k]) / motion.fps
    positions = forward_kinematics(skeleton, rotations, root_pos)

    indices = list(probes.values())
    traj = positions[:, indices]  # (T, P, 3)
    speed = np.linalg.norm(np.diff(traj, axis=0), axis=2) * motion.fps  # (T-1, P)
    dv = np.abs(np.diff(speed, axis=0))  # (T-2, P)
    ddv = np.abs(np.diff(dv, axis=0))  # (T-3, P)
    return SmoothnessSeries(
        joint_names=list(probes.keys()),
        velocity_change=dv,
        acceleration_change=ddv,
        transition_window=transition_window,
    )
