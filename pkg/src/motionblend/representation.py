"""Conversion between raw skeletal motion and the T x D training matrix.

Feature layout per frame: J blocks of 6 rotation values (first two columns
of each joint's rotation matrix), C foot-contact labels, then 3 root values
[height, planar velocity x, planar velocity z].  D = 6*J + C + 3.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import RawMotion, Skeleton, euler_to_matrices, matrices_to_euler

ROTATION_DIMS = 6  # two rotation-matrix columns per joint
ROOT_DIMS = 3  # height + planar velocity (x, z)

NUM_STAGES = 7
NUM_LEVELS = 4
STAGE_LEVELS = (1, 1, 2, 2, 3, 3, 4)  # stage index (1-based) -> level
DEFAULT_LEVEL_RATIOS = (0.25, 0.5, 0.75, 1.0)

DEFAULT_CONTACT_VEL_THRESHOLD = 0.18  # length units / second
DEFAULT_CONTACT_HEIGHT_FACTOR = 2.5  # x mean foot-offset length


@dataclass
class MotionTensor:
    """The T x D feature matrix used for training and generation."""

    data: np.ndarray  # (T, D) float32
    num_joints: int
    num_contacts: int
    fps: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError("motion tensor data must be 2-D")
        expected = ROTATION_DIMS * self.num_joints + self.num_contacts + ROOT_DIMS
        if self.data.shape[1] != expected:
            raise ValueError(
                f"feature dimension {self.data.shape[1]} != "
                f"6*{self.num_joints} + {self.num_contacts} + 3 = {expected}"
            )

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    @property
    def rotation_block(self) -> np.ndarray:
        """(T, J, 6) view of the joint rotation features."""
        T = self.num_frames
        return self.data[:, : ROTATION_DIMS * self.num_joints].reshape(
            T, self.num_joints, ROTATION_DIMS
        )

    @property
    def contact_block(self) -> np.ndarray:
        start = ROTATION_DIMS * self.num_joints
        return self.data[:, start : start + self.num_contacts]

    @property
    def root_block(self) -> np.ndarray:
        return self.data[:, -ROOT_DIMS:]


@dataclass(frozen=True)
class LevelSpec:
    """Frame counts of the four temporal resolution levels (T1 < ... < T4)."""

    level_lengths: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.level_lengths) != NUM_LEVELS:
            raise ValueError("exactly 4 temporal levels are required")
        lengths = self.level_lengths
        if any(l < 2 for l in lengths) or any(
            lengths[i] >= lengths[i + 1] for i in range(NUM_LEVELS - 1)
        ):
            raise ValueError(f"level lengths must be increasing and >= 2: {lengths}")

    @staticmethod
    def for_total_frames(
        total: int, ratios: tuple[float, ...] = DEFAULT_LEVEL_RATIOS
    ) -> "LevelSpec":
        lengths = [max(2, int(round(total * r))) for r in ratios]
        lengths[-1] = total
        # tiny clips can make rounded lengths collide; force strict increase
        for i in range(NUM_LEVELS - 2, -1, -1):
            lengths[i] = min(lengths[i], lengths[i + 1] - 1)
        if lengths[0] < 2:
            raise ValueError(f"clip too short for a 4-level pyramid: T={total}")
        return LevelSpec(tuple(lengths))

    def stage_length(self, stage: int) -> int:
        """Frame count at a 1-based stage index."""
        return self.level_lengths[STAGE_LEVELS[stage - 1] - 1]

    def stage_level(self, stage: int) -> int:
        return STAGE_LEVELS[stage - 1]

    @property
    def total_frames(self) -> int:
        return self.level_lengths[-1]


# ---------------------------------------------------------------------------
# 6D rotation parameterization


def rotation_to_6d(rotation: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix, concatenated: (..., 3, 3) -> (..., 6)."""
    rotation = np.asarray(rotation)
    return np.concatenate([rotation[..., :, 0], rotation[..., :, 1]], axis=-1)


def rotation_from_6d(v: np.ndarray) -> np.ndarray:
    """Gram-Schmidt the two 3-vector halves and complete via cross product.

    Scale-invariant; raises for zero or parallel halves.
    """
    v = np.asarray(v, dtype=np.float64)
    a, b = v[..., 0:3], v[..., 3:6]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(na < 1e-8):
        raise ValueError("degenerate 6D rotation: first half is (near) zero")
    c1 = a / na
    u = b - np.sum(c1 * b, axis=-1, keepdims=True) * c1
    nu = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(nu < 1e-8):
        raise ValueError("degenerate 6D rotation: halves are parallel or second is zero")
    c2 = u / nu
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


# ---------------------------------------------------------------------------
# forward kinematics


def forward_kinematics(
    skeleton: Skeleton,
    local_rotations: np.ndarray,
    root_position: np.ndarray,
) -> np.ndarray:
    """World joint positions from local rotations and root position.

    ``local_rotations``: (..., J, 3, 3); ``root_position``: (..., 3).
    Returns positions (..., J, 3).
    """
    local_rotations = np.asarray(local_rotations, dtype=np.float64)
    root_position = np.asarray(root_position, dtype=np.float64)
    J = skeleton.num_joints
    if local_rotations.shape[-3] != J:
        raise ValueError(
            f"expected rotations for {J} joints, got {local_rotations.shape[-3]}"
        )
    lead = local_rotations.shape[:-3]
    world_rot = np.empty(lead + (J, 3, 3))
    positions = np.empty(lead + (J, 3))
    offsets = skeleton.offsets
    for j, joint in enumerate(skeleton.joints):
        R = local_rotations[..., j, :, :]
        if joint.parent is None:
            world_rot[..., j, :, :] = R
            positions[..., j, :] = root_position
        else:
            parent_rot = world_rot[..., joint.parent, :, :]
            world_rot[..., j, :, :] = parent_rot @ R
            positions[..., j, :] = positions[..., joint.parent, :] + (
                parent_rot @ offsets[j]
            )
    return positions


def raw_motion_rotations(skeleton: Skeleton, motion: RawMotion) -> np.ndarray:
    """Per-frame local rotation matrices (T, J, 3, 3) from BVH Euler channels."""
    T, J = motion.num_frames, skeleton.num_joints
    mats = np.empty((T, J, 3, 3))
    for j, joint in enumerate(skeleton.joints):
        mats[:, j] = euler_to_matrices(motion.joint_eulers(j), joint.rot_order)
    return mats


# ---------------------------------------------------------------------------
# foot contacts


def extract_contacts(
    positions: np.ndarray,
    fps: float,
    vel_threshold: float = DEFAULT_CONTACT_VEL_THRESHOLD,
    height_threshold: float = np.inf,
) -> np.ndarray:
    """Binary contact labels from foot-joint world positions (T, F, 3).

    A foot is in contact when its speed is below ``vel_threshold`` and its
    height below ``height_threshold``; the last frame copies the previous.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 3 or positions.shape[2] != 3:
        raise ValueError("positions must have shape (T, F, 3)")
    T, F = positions.shape[:2]
    if F == 0:
        raise ValueError("empty foot-joint set")
    if T < 2:
        raise ValueError("need at least 2 frames for contact extraction")
    speeds = np.linalg.norm(np.diff(positions, axis=0), axis=2) * fps  # (T-1, F)
    heights = positions[:-1, :, 1]
    labels = np.zeros((T, F), dtype=np.float32)
    labels[:-1] = ((speeds < vel_threshold) & (heights < height_threshold)).astype(
        np.float32
    )
    labels[-1] = labels[-2]
    return labels


def default_height_threshold(skeleton: Skeleton) -> float:
    """2.5x the mean rest-offset length of the foot joints."""
    if not skeleton.foot_joints:
        return np.inf
    lengths = [
        np.linalg.norm(skeleton.joints[i].offset) for i in sorted(skeleton.foot_joints)
    ]
    return DEFAULT_CONTACT_HEIGHT_FACTOR * float(np.mean(lengths))


# ---------------------------------------------------------------------------
# encode / decode


def encode_motion(
    skeleton: Skeleton,
    motion: RawMotion,
    vel_threshold: float = DEFAULT_CONTACT_VEL_THRESHOLD,
    height_threshold: float | None = None,
) -> MotionTensor:
    """RawMotion -> MotionTensor (6D rotations, contacts, root features).

    Root planar velocities are world-frame forward differences scaled by fps,
    with the last frame padded by repetition; contact labels come from foot
    forward kinematics.  With no foot joints declared, C = 0.
    """
    if motion.frames.shape[1] != skeleton.channel_total:
        raise ValueError("motion channel layout does not match skeleton")
    T, J = motion.num_frames, skeleton.num_joints
    fps = motion.fps
    rotations = raw_motion_rotations(skeleton, motion)
    rot6d = rotation_to_6d(rotations).reshape(T, J * ROTATION_DIMS)

    root_pos = motion.root_positions()
    root = np.empty((T, ROOT_DIMS))
    root[:, 0] = root_pos[:, 1]
    for k, axis in ((1, 0), (2, 2)):
        vel = np.diff(root_pos[:, axis]) * fps
        root[:-1, k] = vel
        root[-1, k] = vel[-1]

    feet = sorted(skeleton.foot_joints)
    if feet:
        if height_threshold is None:
            height_threshold = default_height_threshold(skeleton)
        positions = forward_kinematics(skeleton, rotations, root_pos)
        contacts = extract_contacts(
            positions[:, feet], fps, vel_threshold, height_threshold
        )
    else:
        contacts = np.zeros((T, 0), dtype=np.float32)

    data = np.concatenate([rot6d, contacts, root], axis=1)
    return MotionTensor(data=data, num_joints=J, num_contacts=len(feet), fps=fps)


def decode_motion(
    tensor: MotionTensor,
    skeleton: Skeleton,
    initial_root_xz: tuple[float, float] = (0.0, 0.0),
) -> RawMotion:
    """MotionTensor -> RawMotion; the contact block is ignored.

    Root x/z come from cumulative integration of the planar velocities,
    starting at ``initial_root_xz``.
    """
    if tensor.num_joints != skeleton.num_joints:
        raise ValueError(
            f"tensor encodes {tensor.num_joints} joints, skeleton has "
            f"{skeleton.num_joints}"
        )
    T, J = tensor.num_frames, tensor.num_joints
    fps = tensor.fps
    mats = rotation_from_6d(tensor.rotation_block.astype(np.float64))

    root = tensor.root_block.astype(np.float64)
    root_pos = np.empty((T, 3))
    root_pos[:, 1] = root[:, 0]
    for k, axis, start in ((1, 0, initial_root_xz[0]), (2, 2, initial_root_xz[1])):
        # x_{t+1} = x_t + v_t / fps; the padded final velocity is unused
        steps = root[:-1, k] / fps
        root_pos[:, axis] = start + np.concatenate([[0.0], np.cumsum(steps)])

    frames = np.empty((T, skeleton.channel_total))
    frames[:, :3] = root_pos
    for j, joint in enumerate(skeleton.joints):
        frames[:, 3 + 3 * j : 6 + 3 * j] = matrices_to_euler(mats[:, j], joint.rot_order)
    return RawMotion(frame_time=1.0 / fps, frames=frames)


# ---------------------------------------------------------------------------
# temporal resampling


def temporal_resample(tensor: MotionTensor, target_frames: int) -> MotionTensor:
    """Linear interpolation along time, independently per channel.

    Resampling to the same length is the identity; outputs are convex
    combinations of inputs, so per-channel bounds are preserved.
    """
    if target_frames < 2:
        raise ValueError(f"target frame count must be >= 2, got {target_frames}")
    data = resample_array(tensor.data, target_frames)
    return MotionTensor(
        data=data,
        num_joints=tensor.num_joints,
        num_contacts=tensor.num_contacts,
        fps=tensor.fps,
    )


def resample_array(data: np.ndarray, target_frames: int) -> np.ndarray:
    """Linear time interpolation of a (T, D) array onto target_frames rows."""
    T = data.shape[0]
    if target_frames == T:
        return data.copy()
    grid = np.linspace(0.0, T - 1, target_frames)
    lo = np.floor(grid).astype(int)
    hi = np.minimum(lo + 1, T - 1)
    w = (grid - lo)[:, None]
    return ((1.0 - w) * data[lo] + w * data[hi]).astype(data.dtype)


# ---------------------------------------------------------------------------
# flat binary fixture dump

_TENSOR_MAGIC = b"MBT1"


def save_motion_tensor(path: str | Path, tensor: MotionTensor) -> None:
    """Flat binary dump: header (T, J, Q, C, fps) + row-major float32 data."""
    header = struct.pack(
        "<4siiiif",
        _TENSOR_MAGIC,
        tensor.num_frames,
        tensor.num_joints,
        ROTATION_DIMS,
        tensor.num_contacts,
        tensor.fps,
    )
    Path(path).write_bytes(header + tensor.data.astype("<f4").tobytes())


def load_motion_tensor(path: str | Path) -> MotionTensor:
    blob = Path(path).read_bytes()
    head_size = struct.calcsize("<4siiiif")
    magic, T, J, Q, C, fps = struct.unpack("<4siiiif", blob[:head_size])
    if magic != _TENSOR_MAGIC:
        raise ValueError(f"not a motion tensor file: bad magic {magic!r}")
    if Q != ROTATION_DIMS:
        raise ValueError(f"unsupported rotation dimensionality {Q}")
    D = ROTATION_DIMS * J + C + ROOT_DIMS
    data = np.frombuffer(blob[head_size:], dtype="<f4").reshape(T, D).copy()
    return MotionTensor(data=data, num_joints=J, num_contacts=C, fps=fps)
