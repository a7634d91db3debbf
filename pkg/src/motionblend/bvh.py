"""BVH motion-capture parsing, editing, and export.

The BVH text format (HIERARCHY/MOTION) is the only ingestion and export
format of the toolkit.  Parsing yields a :class:`Skeleton` (the joint tree
that every skeleton-aware operation traverses) and a :class:`RawMotion`
(per-frame root position + Euler rotations exactly as stored in the file).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

SUPPORTED_ROT_ORDERS = ("ZYX", "ZXY", "XYZ")

_CHANNEL_TO_AXIS = {
    "Xrotation": "X",
    "Yrotation": "Y",
    "Zrotation": "Z",
}
_POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")


class BvhError(ValueError):
    """A BVH document could not be parsed, written, or transformed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    offset: np.ndarray  # (3,) rest offset from parent, skeleton length units
    rot_order: str = "ZYX"  # channel order as declared in the file
    end_site: np.ndarray | None = None


@dataclass(frozen=True)
class Skeleton:
    """Joint hierarchy in document order, parents always before children."""

    joints: tuple[Joint, ...]
    foot_joints: frozenset[int] = frozenset()

    def __post_init__(self):
        roots = [i for i, j in enumerate(self.joints) if j.parent is None]
        if len(roots) != 1 or roots[0] != 0:
            raise BvhError("skeleton must have exactly one root at index 0")
        for i, j in enumerate(self.joints):
            if j.parent is not None and not (0 <= j.parent < i):
                raise BvhError(
                    f"joint {j.name!r}: parent index {j.parent} breaks topological order"
                )
            if j.rot_order not in SUPPORTED_ROT_ORDERS:
                raise BvhError(
                    f"joint {j.name!r}: unsupported rotation order {j.rot_order!r} "
                    f"(supported: {', '.join(SUPPORTED_ROT_ORDERS)})"
                )
        bad = [i for i in self.foot_joints if not (0 <= i < len(self.joints))]
        if bad:
            raise BvhError(f"foot joint indices out of range: {bad}")

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def parents(self) -> list[int | None]:
        return [j.parent for j in self.joints]

    @property
    def offsets(self) -> np.ndarray:
        return np.stack([j.offset for j in self.joints])

    def index_of(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(f"no joint named {name!r} (have: {', '.join(self.names)})")

    def children_of(self, index: int) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.parent == index]

    def with_foot_joints(self, names) -> "Skeleton":
        indices = frozenset(self.index_of(n) for n in names)
        return replace(self, foot_joints=indices)

    @property
    def channel_total(self) -> int:
        # root carries 3 position channels, every joint 3 rotation channels
        return 3 + 3 * self.num_joints


@dataclass
class RawMotion:
    """Per-frame BVH channel data: root position followed by per-joint Euler
    angles (degrees, file channel order)."""

    frame_time: float
    frames: np.ndarray  # (T, 3 + 3*J)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise BvhError("motion frames must be a 2-D array")
        if self.num_frames < 2:
            raise BvhError(f"motion needs at least 2 frames, got {self.num_frames}")
        if self.frame_time <= 0:
            raise BvhError(f"frame_time must be positive, got {self.frame_time}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def fps(self) -> float:
        return 1.0 / self.frame_time

    def root_positions(self) -> np.ndarray:
        return self.frames[:, :3]

    def joint_eulers(self, joint: int) -> np.ndarray:
        start = 3 + 3 * joint
        return self.frames[:, start : start + 3]


def euler_to_matrices(eulers_deg: np.ndarray, rot_order: str) -> np.ndarray:
    """Euler angles (degrees, BVH channel order) -> (..., 3, 3) matrices.

    BVH composes the listed channels left to right, i.e. ``Z X Y`` means
    ``Rz @ Rx @ Ry``, which is scipy's intrinsic (uppercase) convention.
    """
    r = Rotation.from_euler(rot_order, np.asarray(eulers_deg).reshape(-1, 3), degrees=True)
    return r.as_matrix().reshape(np.asarray(eulers_deg).shape[:-1] + (3, 3))


def matrices_to_euler(mats: np.ndarray, rot_order: str) -> np.ndarray:
    mats = np.asarray(mats)
    r = Rotation.from_matrix(mats.reshape(-1, 3, 3))
    return r.as_euler(rot_order, degrees=True).reshape(mats.shape[:-2] + (3,))


# ---------------------------------------------------------------------------
# parsing


class _TokenStream:
    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, lineno))
        self.pos = 0

    def peek(self) -> str | None:
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    @property
    def line(self) -> int:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 0

    def next(self, expect: str | None = None) -> str:
        if self.pos >= len(self.items):
            raise BvhError(f"unexpected end of document (expected {expect or 'token'})")
        tok, lineno = self.items[self.pos]
        self.pos += 1
        if expect is not None and tok.upper() != expect.upper():
            raise BvhError(f"expected {expect!r}, got {tok!r}", lineno)
        return tok

    def next_float(self, what: str) -> float:
        tok, lineno = self.items[self.pos] if self.pos < len(self.items) else (None, self.line)
        if tok is None:
            raise BvhError(f"unexpected end of document (expected {what})")
        try:
            value = float(tok)
        except ValueError:
            raise BvhError(f"non-numeric {what}: {tok!r}", lineno) from None
        self.pos += 1
        return value

    def next_int(self, what: str) -> int:
        tok, lineno = self.items[self.pos] if self.pos < len(self.items) else (None, self.line)
        if tok is None:
            raise BvhError(f"unexpected end of document (expected {what})")
        try:
            value = int(tok)
        except ValueError:
            raise BvhError(f"non-integer {what}: {tok!r}", lineno) from None
        self.pos += 1
        return value


def _parse_channels(ts: _TokenStream, is_root: bool, name: str) -> str:
    count = ts.next_int("channel count")
    channels = [ts.next() for _ in range(count)]
    line = ts.line
    rot_channels = channels
    if is_root:
        if count != 6 or tuple(channels[:3]) != _POSITION_CHANNELS:
            raise BvhError(
                f"root {name!r} must declare 6 channels starting with "
                "Xposition Yposition Zposition",
                line,
            )
        rot_channels = channels[3:]
    elif count != 3:
        raise BvhError(
            f"joint {name!r}: only 3 rotation channels supported on non-root joints, "
            f"got {count}",
            line,
        )
    axes = []
    for ch in rot_channels:
        if ch not in _CHANNEL_TO_AXIS:
            raise BvhError(f"joint {name!r}: unsupported channel {ch!r}", line)
        axes.append(_CHANNEL_TO_AXIS[ch])
    order = "".join(axes)
    if order not in SUPPORTED_ROT_ORDERS:
        raise BvhError(
            f"joint {name!r}: rotation order {order} unsupported "
            f"(supported: {', '.join(SUPPORTED_ROT_ORDERS)})",
            line,
        )
    return order


def _parse_offset(ts: _TokenStream) -> np.ndarray:
    ts.next("OFFSET")
    return np.array([ts.next_float("offset component") for _ in range(3)])


def parse_bvh(text: str) -> tuple[Skeleton, RawMotion]:
    """Parse a BVH document into its skeleton and raw channel data.

    Joint order matches document order; offsets and Euler values are kept
    bit-faithfully as the decimal values in the file.
    """
    ts = _TokenStream(text)
    ts.next("HIERARCHY")
    ts.next("ROOT")

    joints: list[Joint] = []
    end_sites: dict[int, np.ndarray] = {}

    def parse_joint(parent: int | None):
        name = ts.next()
        index = len(joints)
        ts.next("{")
        offset = _parse_offset(ts)
        ts.next("CHANNELS")
        order = _parse_channels(ts, is_root=parent is None, name=name)
        joints.append(Joint(name=name, parent=parent, offset=offset, rot_order=order))
        while True:
            tok = ts.peek()
            if tok is None:
                raise BvhError("unexpected end of document inside joint block")
            if tok == "}":
                ts.next()
                return
            if tok.upper() == "JOINT":
                ts.next()
                parse_joint(index)
            elif tok.upper() == "END":
                ts.next()
                ts.next("Site")
                ts.next("{")
                end_sites[index] = _parse_offset(ts)
                ts.next("}")
            else:
                raise BvhError(f"unexpected token {tok!r} in joint block", ts.line)

    parse_joint(None)

    ts.next("MOTION")
    ts.next("Frames:")
    num_frames = ts.next_int("frame count")
    ts.next("Frame")
    ts.next("Time:")
    frame_time = ts.next_float("frame time")
    if frame_time <= 0:
        raise BvhError(f"frame time must be positive, got {frame_time}")

    per_frame = 3 + 3 * len(joints)
    remaining = len(ts.items) - ts.pos
    if remaining != num_frames * per_frame:
        raise BvhError(
            f"motion data holds {remaining} values, expected "
            f"{num_frames} frames x {per_frame} channels = {num_frames * per_frame}",
            ts.line,
        )
    frames = np.empty((num_frames, per_frame))
    for t in range(num_frames):
        for c in range(per_frame):
            frames[t, c] = ts.next_float("motion value")

    skeleton = Skeleton(
        joints=tuple(
            replace(j, end_site=end_sites.get(i)) for i, j in enumerate(joints)
        )
    )
    return skeleton, RawMotion(frame_time=frame_time, frames=frames)


# ---------------------------------------------------------------------------
# writing


def _fmt(x: float) -> str:
    # shortest decimal that round-trips through float(); keeps offsets exact
    return np.format_float_positional(float(x), unique=True, trim="0")


def write_bvh(skeleton: Skeleton, motion: RawMotion) -> str:
    """Serialize skeleton + motion back to BVH text.

    Re-parsing the output reproduces offsets exactly and rotations to well
    within 1e-4 degrees (values are written with round-trip precision).
    """
    if motion.frames.shape[1] != skeleton.channel_total:
        raise BvhError(
            f"motion has {motion.frames.shape[1]} channels per frame, "
            f"skeleton declares {skeleton.channel_total}"
        )

    children: list[list[int]] = [[] for _ in skeleton.joints]
    for i, j in enumerate(skeleton.joints):
        if j.parent is not None:
            children[j.parent].append(i)

    lines: list[str] = ["HIERARCHY"]

    def channel_line(index: int) -> str:
        j = skeleton.joints[index]
        rot = " ".join(f"{a}rotation" for a in j.rot_order)
        if j.parent is None:
            return f"CHANNELS 6 Xposition Yposition Zposition {rot}"
        return f"CHANNELS 3 {rot}"

    def emit(index: int, depth: int):
        j = skeleton.joints[index]
        pad = "\t" * depth
        kind = "ROOT" if j.parent is None else "JOINT"
        lines.append(f"{pad}{kind} {j.name}")
        lines.append(f"{pad}{{")
        lines.append(f"{pad}\tOFFSET {' '.join(_fmt(v) for v in j.offset)}")
        lines.append(f"{pad}\t{channel_line(index)}")
        if children[index]:
            for c in children[index]:
                emit(c, depth + 1)
        else:
            site = j.end_site if j.end_site is not None else np.zeros(3)
            lines.append(f"{pad}\tEnd Site")
            lines.append(f"{pad}\t{{")
            lines.append(f"{pad}\t\tOFFSET {' '.join(_fmt(v) for v in site)}")
            lines.append(f"{pad}\t}}")
        lines.append(f"{pad}}}")

    emit(0, 0)
    lines.append("MOTION")
    lines.append(f"Frames: {motion.num_frames}")
    lines.append(f"Frame Time: {_fmt(motion.frame_time)}")
    for row in motion.frames:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# editing


def select_joints(
    skeleton: Skeleton, motion: RawMotion, keep: set[str] | list[str]
) -> tuple[Skeleton, RawMotion]:
    """Restrict skeleton + motion to a subset of joints.

    Each kept joint is re-parented to its nearest kept ancestor.  Its new
    rest offset is the sum of offsets along the removed chain, and its
    per-frame rotation is the composition of the removed intermediate local
    rotations with its own, so world orientations are preserved exactly and
    world positions are preserved when the removed joints are near identity.
    """
    keep_set = set(keep)
    unknown = keep_set - set(skeleton.names)
    if unknown:
        raise BvhError(f"keep list names unknown joints: {sorted(unknown)}")
    root_name = skeleton.joints[0].name
    if root_name not in keep_set:
        raise BvhError(f"keep list must include the root joint {root_name!r}")
    if motion.frames.shape[1] != skeleton.channel_total:
        raise BvhError("motion channel layout does not match skeleton")

    kept_indices = [i for i, j in enumerate(skeleton.joints) if j.name in keep_set]
    old_to_new = {old: new for new, old in enumerate(kept_indices)}

    T = motion.num_frames
    new_joints: list[Joint] = []
    new_rot_cols = np.empty((T, 3 * len(kept_indices)))

    for new_idx, old_idx in enumerate(kept_indices):
        j = skeleton.joints[old_idx]
        # walk up through removed ancestors to the nearest kept one
        chain = [old_idx]
        p = j.parent
        while p is not None and p not in old_to_new:
            chain.append(p)
            p = skeleton.joints[p].parent
        chain.reverse()  # topmost removed ancestor first, self last
        new_parent = old_to_new[p] if p is not None else None

        offset = np.sum([skeleton.joints[c].offset for c in chain], axis=0)
        if len(chain) == 1:
            composed = euler_to_matrices(motion.joint_eulers(old_idx), j.rot_order)
        else:
            composed = None
            for c in chain:
                mats = euler_to_matrices(
                    motion.joint_eulers(c), skeleton.joints[c].rot_order
                )
                composed = mats if composed is None else composed @ mats
        eulers = (
            motion.joint_eulers(old_idx)
            if len(chain) == 1
            else matrices_to_euler(composed, j.rot_order)
        )
        new_rot_cols[:, 3 * new_idx : 3 * new_idx + 3] = eulers
        new_joints.append(
            Joint(
                name=j.name,
                parent=new_parent,
                offset=offset,
                rot_order=j.rot_order,
                end_site=j.end_site,
            )
        )

    new_feet = frozenset(
        old_to_new[i] for i in skeleton.foot_joints if i in old_to_new
    )
    new_skeleton = Skeleton(joints=tuple(new_joints), foot_joints=new_feet)
    frames = np.concatenate([motion.root_positions(), new_rot_cols], axis=1)
    return new_skeleton, RawMotion(frame_time=motion.frame_time, frames=frames)


def resample(motion: RawMotion, target_fps: float) -> RawMotion:
    """Subsample to a lower frame rate via nearest-time frame selection.

    No interpolation: output frame k is source frame ``round(k * src/target)``.
    Upsampling is unsupported.
    """
    if target_fps <= 0:
        raise BvhError(f"target fps must be positive, got {target_fps}")
    source_fps = motion.fps
    if target_fps > source_fps * (1 + 1e-9):
        raise BvhError(
            f"upsampling unsupported: source {source_fps:.6g} fps, "
            f"target {target_fps:.6g} fps"
        )
    ratio = source_fps / target_fps
    indices = []
    k = 0
    while True:
        idx = int(round(k * ratio))
        if idx > motion.num_frames - 1:
            break
        indices.append(idx)
        k += 1
    if len(indices) < 2:
        raise BvhError("resampling would leave fewer than 2 frames")
    return RawMotion(frame_time=1.0 / target_fps, frames=motion.frames[indices].copy())


def trim(motion: RawMotion, start_frame: int, end_frame: int) -> RawMotion:
    """Keep frames [start_frame, end_frame); frames are copied verbatim."""
    if not (0 <= start_frame < end_frame <= motion.num_frames):
        raise BvhError(
            f"trim range [{start_frame}, {end_frame}) invalid for "
            f"{motion.num_frames} frames"
        )
    return RawMotion(
        frame_time=motion.frame_time,
        frames=motion.frames[start_frame:end_frame].copy(),
    )


# ---------------------------------------------------------------------------
# plain-text joint-list configs


def parse_name_list(text: str) -> list[str]:
    """One joint name per line; blank lines and '#' comments ignored."""
    names = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.append(line)
    return names


def load_name_list(path: str | Path) -> list[str]:
    return parse_name_list(Path(path).read_text())


def default_mixamo_keep_list() -> list[str]:
    """The bundled 24-joint Mixamo subset (overridable via a keep-list file)."""
    from importlib.resources import files

    return parse_name_list(files("motionblend.data").joinpath("mixamo_keep24.txt").read_text())
