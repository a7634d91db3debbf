"""Declarative experiment configuration and the BVH ingestion pipeline.

One YAML file describes an experiment end to end: input clips with their
identities, skeleton reduction, frame rate, trims, training and metric
parameters.  CLI flags override individual keys.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import bvh
from .bvh import RawMotion, Skeleton
from .representation import MotionTensor, encode_motion
from .training import LossWeights, TrainConfig

FOOT_ALIASES = {
    "left_foot": ("leftfoot", "lfoot", "leftankle"),
    "left_toe": ("lefttoe", "lefttoebase", "ltoe"),
    "right_foot": ("rightfoot", "rfoot", "rightankle"),
    "right_toe": ("righttoe", "righttoebase", "rtoe"),
}


@dataclass
class MotionEntry:
    path: Path
    identity: str
    trim: tuple[int, int] | None = None


@dataclass
class ExperimentConfig:
    motions: list[MotionEntry]
    fps: float = 30.0
    seed: int = 0
    output_dir: Path = Path("runs/experiment")
    keep_joints: Path | None = None
    foot_joints: Path | None = None
    probe_joints: list[str] | None = None
    train: dict = field(default_factory=dict)
    conditioning: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    contact: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [m.identity for m in self.motions]
        if len(names) != len(set(names)):
            raise ValueError(f"identities must be unique, got {names}")

    @property
    def identities(self) -> list[str]:
        return [m.identity for m in self.motions]

    def train_config(self) -> TrainConfig:
        t = self.train
        cond = self.conditioning
        weights = LossWeights(
            lambda_adv=float(t.get("lambda_adv", 1.0)),
            lambda_rec=float(t.get("lambda_rec", 50.0)),
            lambda_con=float(t.get("lambda_con", 5.0)),
            lambda_gp=float(t.get("lambda_gp", 1.0)),
        )
        return TrainConfig(
            identities=self.identities,
            iterations_per_level=int(t.get("iterations_per_level", 15000)),
            learning_rate=float(t.get("learning_rate", 1e-4)),
            betas=tuple(t.get("betas", (0.5, 0.9))),
            seed=self.seed,
            weights=weights,
            modulation=str(cond.get("kind", "spade")),
            conditioning_levels=tuple(cond.get("levels", (1,))),
            hidden_width=int(t.get("hidden_width", 96)),
            num_layers=int(t.get("num_layers", 4)),
            kernel_size=int(t.get("kernel_size", 5)),
            neighborhood_distance=int(t.get("neighborhood_distance", 2)),
            level_ratios=tuple(t.get("level_ratios", (0.25, 0.5, 0.75, 1.0))),
            contact_sigmoid_gain=float(self.contact.get("sigmoid_gain", 12.0)),
            contact_sigmoid_center=float(self.contact.get("sigmoid_center", 0.5)),
            device=str(t.get("device", "cpu")),
        )


def _apply_override(data: dict, dotted: str, raw_value: str) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot override through non-mapping key {key!r}")
    node[keys[-1]] = yaml.safe_load(raw_value)


def load_experiment(
    path: str | Path, overrides: list[str] | None = None
) -> tuple[ExperimentConfig, dict]:
    """Load an experiment YAML, apply `key=value` overrides (dotted keys),
    and return the config plus the resolved raw mapping."""
    path = Path(path)
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    data = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        dotted, _, raw = item.partition("=")
        _apply_override(data, dotted.strip(), raw.strip())

    raw_motions = data.get("motions")
    if not raw_motions:
        raise ValueError(f"{path}: config must list at least one motion")
    base = path.parent
    motions = []
    for entry in raw_motions:
        trim_range = entry.get("trim")
        motions.append(
            MotionEntry(
                path=(base / entry["path"]).resolve(),
                identity=str(entry["identity"]),
                trim=None if trim_range is None else (int(trim_range[0]), int(trim_range[1])),
            )
        )

    def _maybe_path(key: str) -> Path | None:
        value = data.get(key)
        return None if value is None else (base / value).resolve()

    config = ExperimentConfig(
        motions=motions,
        fps=float(data.get("fps", 30.0)),
        seed=int(data.get("seed", 0)),
        output_dir=(base / data.get("output_dir", "runs/experiment")).resolve(),
        keep_joints=_maybe_path("keep_joints"),
        foot_joints=_maybe_path("foot_joints"),
        probe_joints=data.get("probe_joints"),
        train=data.get("train", {}) or {},
        conditioning=data.get("conditioning", {}) or {},
        metrics=data.get("metrics", {}) or {},
        contact=data.get("contact", {}) or {},
    )
    return config, data


def _normalize(name: str) -> str:
    return name.lower().replace("_", "").replace(" ", "")


def resolve_foot_joints(skeleton: Skeleton, names: list[str] | None = None) -> list[str]:
    """Foot-joint names: explicit list, or heel/toe pairs found by alias."""
    if names is not None:
        for n in names:
            skeleton.index_of(n)  # raises on unknown names
        return list(names)
    normalized = {_normalize(j.name): j.name for j in skeleton.joints}
    found = []
    for aliases in FOOT_ALIASES.values():
        for alias in aliases:
            if alias in normalized:
                found.append(normalized[alias])
                break
    return found


def _skeletons_match(a: Skeleton, b: Skeleton) -> bool:
    return (
        a.names == b.names
        and a.parents == b.parents
        and all(
            abs(x.offset - y.offset).max() < 1e-9 for x, y in zip(a.joints, b.joints)
        )
    )


def ingest_motions(
    config: ExperimentConfig,
) -> tuple[Skeleton, list[MotionTensor], list[RawMotion]]:
    """parse -> select -> resample -> trim -> encode for every configured clip.

    All clips must reduce to the same skeleton and frame count.
    """
    keep = bvh.load_name_list(config.keep_joints) if config.keep_joints else None
    foot_names = (
        bvh.load_name_list(config.foot_joints) if config.foot_joints else None
    )
    vel_threshold = float(config.contact.get("vel_threshold", 0.18))
    height_threshold = config.contact.get("height_threshold")

    skeleton: Skeleton | None = None
    tensors: list[MotionTensor] = []
    raws: list[RawMotion] = []
    for entry in config.motions:
        if not entry.path.exists():
            raise FileNotFoundError(f"motion file not found: {entry.path}")
        skel, raw = bvh.parse_bvh(entry.path.read_text())
        if keep:
            skel, raw = bvh.select_joints(skel, raw, keep)
        raw = bvh.resample(raw, config.fps)
        if entry.trim is not None:
            raw = bvh.trim(raw, *entry.trim)
        skel = skel.with_foot_joints(resolve_foot_joints(skel, foot_names))
        if skeleton is None:
            skeleton = skel
        elif not _skeletons_match(skeleton, skel):
            raise ValueError(
                f"{entry.path}: skeleton differs from the first motion's skeleton"
            )
        tensor = encode_motion(
            skel,
            raw,
            vel_threshold=vel_threshold,
            height_threshold=None if height_threshold is None else float(height_threshold),
        )
        tensors.append(tensor)
        raws.append(raw)

    lengths = {t.num_frames for t in tensors}
    if len(lengths) > 1:
        raise ValueError(
            f"all motions must share a frame count after trimming, got {sorted(lengths)}"
        )
    return skeleton, tensors, raws
