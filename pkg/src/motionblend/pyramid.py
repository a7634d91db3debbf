"""The 7-stage, 4-level coarse-to-fine generator/discriminator hierarchy.

Stage 1 synthesizes coarse motion from noise (modulated by the identity map
when its level is conditioned); every later stage is a residual refiner of
the temporally upsampled previous output.  A checkpoint stores everything
needed to regenerate: weights, fixed reconstruction noise, per-stage noise
amplitudes, the skeleton, and the training identities in batch order.
"""

from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .bvh import Joint, Skeleton
from .representation import (
    NUM_STAGES,
    ROOT_DIMS,
    ROTATION_DIMS,
    LevelSpec,
    MotionTensor,
)
from .skeleton_nn import (
    ModulationBlock,
    SkeletonConv,
    SkeletonIdMap,
    SkeletonNeighborhoods,
    build_neighborhoods,
    motion_channel_widths,
    spread_hidden_widths,
)

CHECKPOINT_VERSION = 1

MODULATION_KINDS = ("spade", "film", "none")


class UntrainedModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs shared by all stages."""

    hidden_width: int = 96
    num_layers: int = 4
    kernel_size: int = 5
    neighborhood_distance: int = 2
    modulation: str = "spade"
    conditioning_levels: frozenset[int] = frozenset({1})

    def __post_init__(self):
        if self.modulation not in MODULATION_KINDS:
            raise ValueError(f"unknown modulation kind {self.modulation!r}")
        bad = [l for l in self.conditioning_levels if not 1 <= l <= 4]
        if bad:
            raise ValueError(f"conditioning levels out of range: {bad}")


class StageGenerator(nn.Module):
    """One pyramid stage.  Residual stages output prev + correction and are
    exact passthroughs while their output layer is zero (the default init)."""

    def __init__(
        self,
        neighborhoods: SkeletonNeighborhoods,
        motion_widths: list[int],
        config: ModelConfig,
        num_identities: int,
        conditioned: bool,
        residual: bool,
    ):
        super().__init__()
        self.residual = residual
        self.conditioned = conditioned
        hidden = spread_hidden_widths(config.hidden_width, neighborhoods.num_groups)
        k = config.kernel_size
        self.pre = SkeletonConv(neighborhoods, motion_widths, hidden, k)
        self.modulation = None
        if conditioned:
            mod_kernel = 1 if config.modulation == "film" else k
            self.modulation = ModulationBlock(
                neighborhoods, hidden, num_identities, kernel_size=mod_kernel
            )
        self.body = nn.ModuleList(
            SkeletonConv(neighborhoods, hidden, hidden, k)
            for _ in range(config.num_layers)
        )
        self.post = SkeletonConv(neighborhoods, hidden, motion_widths, k)
        self.act = nn.LeakyReLU(0.2)

    def init_weights(self, generator: torch.Generator) -> None:
        self.pre.init_random(generator)
        for layer in self.body:
            layer.init_random(generator)
        if self.modulation is not None:
            self.modulation.init_random_embedding(generator)
            self.modulation.init_identity_modulation()
        if self.residual:
            self.post.init_zero()  # start as an exact passthrough
        else:
            self.post.init_random(generator)

    def forward(
        self,
        prev: torch.Tensor | None,
        noise: torch.Tensor,
        id_maps=None,
    ) -> torch.Tensor:
        if self.residual:
            if prev is None:
                raise ValueError("residual stage requires the previous motion")
            if prev.shape != noise.shape:
                raise ValueError(
                    f"resolution mismatch: prev {tuple(prev.shape)} vs noise "
                    f"{tuple(noise.shape)}"
                )
            x = prev + noise
        else:
            if prev is not None:
                raise ValueError("stage 1 takes no previous motion")
            x = noise
        if self.conditioned and id_maps is None:
            raise ValueError("conditioned stage requires an id map")
        h = self.act(self.pre(x))
        if self.modulation is not None:
            h = self.modulation(h, id_maps)
        for layer in self.body:
            h = self.act(layer(h))
        out = self.post(h)
        return prev + out if self.residual else out


class StageDiscriminator(nn.Module):
    """Patch critic over time: returns a (B, T) map of window scores."""

    def __init__(
        self,
        neighborhoods: SkeletonNeighborhoods,
        motion_widths: list[int],
        config: ModelConfig,
    ):
        super().__init__()
        hidden = spread_hidden_widths(config.hidden_width, neighborhoods.num_groups)
        k = config.kernel_size
        self.pre = SkeletonConv(neighborhoods, motion_widths, hidden, k)
        self.body = nn.ModuleList(
            SkeletonConv(neighborhoods, hidden, hidden, k)
            for _ in range(max(1, config.num_layers - 1))
        )
        self.head = nn.Conv1d(sum(hidden), 1, k)
        self.act = nn.LeakyReLU(0.2)
        self.kernel_size = k

    def init_weights(self, generator: torch.Generator) -> None:
        self.pre.init_random(generator)
        for layer in self.body:
            layer.init_random(generator)
        fan_in = self.head.weight.shape[1] * self.head.weight.shape[2]
        with torch.no_grad():
            self.head.weight.copy_(
                torch.randn(self.head.weight.shape, generator=generator)
                / np.sqrt(fan_in)
            )
            self.head.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.act(self.pre(x))
        for layer in self.body:
            h = self.act(layer(h))
        pad = self.kernel_size // 2
        h = torch.nn.functional.pad(h, (pad, pad), mode="reflect")
        return self.head(h).squeeze(1)


@dataclass
class GenerationTrace:
    """Per-stage intermediate motions plus the final full-resolution tensor."""

    stage_outputs: list[np.ndarray]
    final: MotionTensor


class PyramidModel(nn.Module):
    """Container for the staged GAN plus everything inference needs."""

    def __init__(
        self,
        skeleton: Skeleton,
        num_contacts: int,
        fps: float,
        level_spec: LevelSpec,
        identities: list[str],
        config: ModelConfig,
        seed: int = 0,
    ):
        super().__init__()
        if len(identities) != len(set(identities)):
            raise ValueError("identity names must be unique")
        self.skeleton = skeleton
        self.num_contacts = num_contacts
        self.fps = fps
        self.level_spec = level_spec
        self.identities = list(identities)
        self.config = config
        self.seed = seed
        self.config_hash = ""
        self.trained_stages = 0

        self.neighborhoods = build_neighborhoods(skeleton, config.neighborhood_distance)
        self.motion_widths = motion_channel_widths(skeleton.num_joints, num_contacts)
        self.feature_dim = sum(self.motion_widths)

        conditioned_levels = (
            set() if config.modulation == "none" else set(config.conditioning_levels)
        )
        self.conditioned_levels = conditioned_levels
        gens, discs = [], []
        for stage in range(1, NUM_STAGES + 1):
            level = level_spec.stage_level(stage)
            gens.append(
                StageGenerator(
                    self.neighborhoods,
                    self.motion_widths,
                    config,
                    num_identities=len(identities),
                    conditioned=level in conditioned_levels,
                    residual=stage > 1,
                )
            )
            discs.append(StageDiscriminator(self.neighborhoods, self.motion_widths, config))
        self.generators = nn.ModuleList(gens)
        self.discriminators = nn.ModuleList(discs)

        init_gen = torch.Generator().manual_seed(seed)
        for g, d in zip(self.generators, self.discriminators):
            g.init_weights(init_gen)
            d.init_weights(init_gen)

        B = len(identities)
        for stage in range(1, NUM_STAGES + 1):
            T_i = level_spec.stage_length(stage)
            self.register_buffer(
                f"z_star_{stage}", torch.zeros(B, self.feature_dim, T_i)
            )
        self.register_buffer("noise_amplitudes", torch.ones(NUM_STAGES))

    # --- plumbing -----------------------------------------------------------

    @property
    def num_identities(self) -> int:
        return len(self.identities)

    @property
    def is_trained(self) -> bool:
        return self.trained_stages >= NUM_STAGES

    def z_star(self, stage: int) -> torch.Tensor:
        return getattr(self, f"z_star_{stage}")

    def identity_index(self, name: str) -> int:
        try:
            return self.identities.index(name)
        except ValueError:
            raise KeyError(
                f"unknown identity {name!r}; available: {', '.join(self.identities)}"
            ) from None

    def stage_conditioned(self, stage: int) -> bool:
        return self.level_spec.stage_level(stage) in self.conditioned_levels

    def generator_forward(
        self,
        stage: int,
        prev_motion: torch.Tensor | None,
        noise: torch.Tensor,
        id_maps=None,
    ) -> torch.Tensor:
        """Run one stage.  ``id_maps`` is required iff the stage is conditioned
        (and is ignored otherwise)."""
        gen = self.generators[stage - 1]
        if not gen.conditioned:
            id_maps = None
        return gen(prev_motion, noise, id_maps)

    def discriminator_forward(self, stage: int, motion: torch.Tensor) -> torch.Tensor:
        expected = self.level_spec.stage_length(stage)
        if motion.shape[-1] != expected:
            raise ValueError(
                f"stage {stage} expects {expected} frames, got {motion.shape[-1]}"
            )
        return self.discriminators[stage - 1](motion)

    def to_motion_tensor(self, data: torch.Tensor) -> MotionTensor:
        """(D, T) or (1, D, T) tensor -> MotionTensor."""
        arr = data.detach().cpu().numpy()
        if arr.ndim == 3:
            arr = arr[0]
        return MotionTensor(
            data=arr.T,
            num_joints=self.skeleton.num_joints,
            num_contacts=self.num_contacts,
            fps=self.fps,
        )


def resample_time(x: torch.Tensor, target_frames: int) -> torch.Tensor:
    """Linear time interpolation of (B, C, T) onto target_frames frames,
    matching :func:`representation.resample_array`."""
    T = x.shape[-1]
    if target_frames == T:
        return x
    grid = torch.linspace(0.0, T - 1, target_frames, dtype=x.dtype, device=x.device)
    lo = torch.clamp(grid.floor().long(), max=T - 1)
    hi = torch.clamp(lo + 1, max=T - 1)
    w = (grid - lo.to(x.dtype)).view(1, 1, -1)
    return x[..., lo] * (1.0 - w) + x[..., hi] * w


def _level_lengths_for(model: PyramidModel, total_frames: int | None) -> LevelSpec:
    spec = model.level_spec
    if total_frames is None or total_frames == spec.total_frames:
        return spec
    ratios = tuple(l / spec.total_frames for l in spec.level_lengths)
    custom = LevelSpec.for_total_frames(total_frames, ratios)
    if custom.level_lengths[0] < model.config.kernel_size:
        raise ValueError(
            f"requested length {total_frames} makes the coarsest level shorter "
            f"than the convolution kernel ({custom.level_lengths[0]} < "
            f"{model.config.kernel_size})"
        )
    return custom


def generate_full(
    model: PyramidModel,
    id_map: SkeletonIdMap | None,
    seed: int,
    mode: str = "random",
    recon_index: int | None = None,
    total_frames: int | None = None,
    strict: bool = True,
) -> GenerationTrace:
    """Run all stages coarse-to-fine and return the trace.

    ``mode='random'`` draws per-stage Gaussian noise scaled by the stored
    amplitudes; ``mode='reconstruction'`` replays the fixed noise of batch
    element ``recon_index``.  Fixed (weights, seed, id map) give bit-identical
    output.
    """
    if strict and not model.is_trained:
        raise UntrainedModelError(
            f"model has {model.trained_stages}/{NUM_STAGES} trained stages; "
            "pass strict=False to generate anyway"
        )
    if mode not in ("random", "reconstruction"):
        raise ValueError(f"unknown generation mode {mode!r}")
    if mode == "reconstruction":
        if recon_index is None or not 0 <= recon_index < model.num_identities:
            raise ValueError("reconstruction mode needs a valid batch index")
        if total_frames not in (None, model.level_spec.total_frames):
            raise ValueError("reconstruction mode runs at the training length")

    spec = _level_lengths_for(model, total_frames)
    needs_ids = bool(model.conditioned_levels)
    if needs_ids:
        if id_map is None:
            raise ValueError("a conditioned model requires an id map")
        if id_map.num_frames != spec.total_frames:
            raise ValueError(
                f"id map length {id_map.num_frames} != output length "
                f"{spec.total_frames}"
            )

    device = model.noise_amplitudes.device
    dtype = model.noise_amplitudes.dtype
    rng = torch.Generator(device="cpu").manual_seed(seed)
    D = model.feature_dim

    x = None
    outputs: list[np.ndarray] = []
    with torch.no_grad():
        for stage in range(1, NUM_STAGES + 1):
            T_i = spec.stage_length(stage)
            if mode == "reconstruction":
                noise = model.z_star(stage)[recon_index : recon_index + 1]
            else:
                amp = model.noise_amplitudes[stage - 1]
                noise = amp * torch.randn(1, D, T_i, generator=rng, dtype=dtype).to(device)
            ids = None
            if model.stage_conditioned(stage):
                ids = id_map.resample(T_i)
            prev = resample_time(x, T_i) if x is not None else None
            x = model.generator_forward(stage, prev, noise, ids)
            outputs.append(x[0].detach().cpu().numpy().T)
    return GenerationTrace(stage_outputs=outputs, final=model.to_motion_tensor(x))


# ---------------------------------------------------------------------------
# checkpoints


def _skeleton_to_dict(skeleton: Skeleton) -> dict:
    return {
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "offset": j.offset.tolist(),
                "rot_order": j.rot_order,
                "end_site": None if j.end_site is None else j.end_site.tolist(),
            }
            for j in skeleton.joints
        ],
        "foot_joints": sorted(skeleton.foot_joints),
    }


def _skeleton_from_dict(data: dict) -> Skeleton:
    joints = tuple(
        Joint(
            name=j["name"],
            parent=j["parent"],
            offset=np.array(j["offset"], dtype=np.float64),
            rot_order=j["rot_order"],
            end_site=None if j["end_site"] is None else np.array(j["end_site"]),
        )
        for j in data["joints"]
    )
    return Skeleton(joints=joints, foot_joints=frozenset(data["foot_joints"]))


def config_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_checkpoint(model: PyramidModel, path: str | Path) -> None:
    state = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    blob = {
        "version": CHECKPOINT_VERSION,
        "skeleton": _skeleton_to_dict(model.skeleton),
        "num_contacts": model.num_contacts,
        "fps": model.fps,
        "level_lengths": list(model.level_spec.level_lengths),
        "identities": list(model.identities),
        "model_config": {
            "hidden_width": model.config.hidden_width,
            "num_layers": model.config.num_layers,
            "kernel_size": model.config.kernel_size,
            "neighborhood_distance": model.config.neighborhood_distance,
            "modulation": model.config.modulation,
            "conditioning_levels": sorted(model.config.conditioning_levels),
        },
        "seed": model.seed,
        "config_hash": model.config_hash,
        "trained_stages": model.trained_stages,
        "state": state,
    }
    Path(path).write_bytes(pickle.dumps(blob, protocol=4))


def load_checkpoint(path: str | Path) -> PyramidModel:
    blob = pickle.loads(Path(path).read_bytes())
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {blob.get('version')!r} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    cfg = blob["model_config"]
    model = PyramidModel(
        skeleton=_skeleton_from_dict(blob["skeleton"]),
        num_contacts=blob["num_contacts"],
        fps=blob["fps"],
        level_spec=LevelSpec(tuple(blob["level_lengths"])),
        identities=blob["identities"],
        config=ModelConfig(
            hidden_width=cfg["hidden_width"],
            num_layers=cfg["num_layers"],
            kernel_size=cfg["kernel_size"],
            neighborhood_distance=cfg["neighborhood_distance"],
            modulation=cfg["modulation"],
            conditioning_levels=frozenset(cfg["conditioning_levels"]),
        ),
        seed=blob["seed"],
    )
    model.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in blob["state"].items()})
    model.config_hash = blob["config_hash"]
    model.trained_stages = blob["trained_stages"]
    return model
