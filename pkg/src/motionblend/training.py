"""Progressive stage-by-stage adversarial training over a batch of motions.

Each stage's generator/discriminator pair is trained on its own while all
other stages stay frozen.  The critic follows the Wasserstein objective with
a gradient penalty; generators add an L1 reconstruction term driven by fixed
noise, and the final stage adds the foot-contact consistency term.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .bvh import Skeleton
from .pyramid import (
    ModelConfig,
    PyramidModel,
    config_digest,
    resample_time,
)
from .representation import (
    DEFAULT_LEVEL_RATIOS,
    NUM_STAGES,
    ROTATION_DIMS,
    LevelSpec,
    MotionTensor,
)
from .skeleton_nn import SkeletonIdMap

DIVERGENCE_LIMIT = 1e6

TELEMETRY_FIELDS = (
    "iteration",
    "stage",
    "level",
    "critic_loss",
    "wasserstein",
    "grad_penalty",
    "gen_adv",
    "gen_rec",
    "gen_contact",
    "gen_total",
)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class LossWeights:
    lambda_adv: float = 1.0
    lambda_rec: float = 50.0
    lambda_con: float = 5.0
    lambda_gp: float = 1.0

    def __post_init__(self):
        for name in ("lambda_adv", "lambda_rec", "lambda_con", "lambda_gp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class TrainConfig:
    identities: list[str]
    iterations_per_level: int = 15000
    learning_rate: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.9)
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    modulation: str = "spade"
    conditioning_levels: tuple[int, ...] = (1,)
    hidden_width: int = 96
    num_layers: int = 4
    kernel_size: int = 5
    neighborhood_distance: int = 2
    level_ratios: tuple[float, ...] = DEFAULT_LEVEL_RATIOS
    contact_sigmoid_gain: float = 12.0
    contact_sigmoid_center: float = 0.5
    device: str = "cpu"

    def __post_init__(self):
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")
        if not self.identities:
            raise ValueError("at least one motion identity is required")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            hidden_width=self.hidden_width,
            num_layers=self.num_layers,
            kernel_size=self.kernel_size,
            neighborhood_distance=self.neighborhood_distance,
            modulation=self.modulation,
            conditioning_levels=frozenset(self.conditioning_levels),
        )

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return config_digest(payload)


# ---------------------------------------------------------------------------
# loss pieces


def gradient_penalty(
    discriminator,
    real: torch.Tensor,
    fake: torch.Tensor,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """E[(||grad D(M~)||_2 - 1)^2] on per-sample interpolates
    M~ = alpha * fake + (1 - alpha) * real, alpha ~ U[0, 1].

    The result stays differentiable w.r.t. the critic's weights.
    """
    if real.shape != fake.shape:
        raise ValueError(f"shape mismatch: real {tuple(real.shape)} vs fake {tuple(fake.shape)}")
    B = real.shape[0]
    alpha_shape = (B,) + (1,) * (real.dim() - 1)
    alpha = torch.rand(alpha_shape, generator=generator, dtype=real.dtype).to(real.device)
    interp = (alpha * fake.detach() + (1.0 - alpha) * real.detach()).requires_grad_(True)
    scores = discriminator(interp)
    values = scores.reshape(B, -1).mean(dim=1)
    grads = torch.autograd.grad(
        outputs=values.sum(), inputs=interp, create_graph=True
    )[0]
    if not torch.isfinite(grads).all():
        raise TrainingDiverged("non-finite gradients inside the gradient penalty")
    norms = grads.reshape(B, -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def constant_id_maps(num_identities: int, frames: int) -> list[SkeletonIdMap]:
    return [
        SkeletonIdMap.constant(b, frames, num_identities) for b in range(num_identities)
    ]


def reconstruction_prefix(model: PyramidModel, stage: int) -> torch.Tensor | None:
    """Frozen reconstruction-mode output of stages < stage, resampled to the
    stage's frame count (None for stage 1)."""
    if stage == 1:
        return None
    B = model.num_identities
    with torch.no_grad():
        x = None
        for s in range(1, stage):
            T_s = model.level_spec.stage_length(s)
            ids = constant_id_maps(B, T_s) if model.stage_conditioned(s) else None
            prev = resample_time(x, T_s) if x is not None else None
            x = model.generator_forward(s, prev, model.z_star(s), ids)
        return resample_time(x, model.level_spec.stage_length(stage))


def reconstruction_loss(
    model: PyramidModel,
    stage: int,
    real_level: torch.Tensor,
    prefix: torch.Tensor | None = None,
) -> torch.Tensor:
    """Mean L1 between the stage's fixed-noise reconstruction and the real
    batch at the stage's resolution (each element under its own identity)."""
    if prefix is None and stage > 1:
        prefix = reconstruction_prefix(model, stage)
    T_i = model.level_spec.stage_length(stage)
    ids = (
        constant_id_maps(model.num_identities, T_i)
        if model.stage_conditioned(stage)
        else None
    )
    out = model.generator_forward(stage, prefix, model.z_star(stage), ids)
    return (out - real_level).abs().mean()


def skewed_sigmoid(x, gain: float = 12.0, center: float = 0.5):
    return 1.0 / (1.0 + np.exp(-gain * (np.asarray(x, dtype=np.float64) - center)))


def rotations_from_features(batch: torch.Tensor, num_joints: int) -> torch.Tensor:
    """(B, D, T) features -> (B, T, J, 3, 3) rotations via Gram-Schmidt."""
    B, _, T = batch.shape
    six = batch[:, : num_joints * ROTATION_DIMS].reshape(B, num_joints, ROTATION_DIMS, T)
    six = six.permute(0, 3, 1, 2)  # (B, T, J, 6)
    a, b = six[..., 0:3], six[..., 3:6]
    c1 = a / a.norm(dim=-1, keepdim=True).clamp_min(1e-8)
    u = b - (c1 * b).sum(-1, keepdim=True) * c1
    c2 = u / u.norm(dim=-1, keepdim=True).clamp_min(1e-8)
    c3 = torch.cross(c1, c2, dim=-1)
    return torch.stack([c1, c2, c3], dim=-1)


def fk_positions_torch(
    skeleton: Skeleton, rotations: torch.Tensor, root_positions: torch.Tensor
) -> torch.Tensor:
    """Differentiable forward kinematics: (B, T, J, 3, 3) + (B, T, 3) ->
    (B, T, J, 3) world positions."""
    offsets = torch.as_tensor(
        skeleton.offsets, dtype=rotations.dtype, device=rotations.device
    )
    world_rot: list[torch.Tensor] = []
    positions: list[torch.Tensor] = []
    for j, joint in enumerate(skeleton.joints):
        R = rotations[:, :, j]
        if joint.parent is None:
            world_rot.append(R)
            positions.append(root_positions)
        else:
            parent_rot = world_rot[joint.parent]
            world_rot.append(parent_rot @ R)
            positions.append(
                positions[joint.parent]
                + (parent_rot @ offsets[j].reshape(1, 1, 3, 1)).squeeze(-1)
            )
    return torch.stack(positions, dim=2)


def root_positions_from_features(batch: torch.Tensor, fps: float) -> torch.Tensor:
    """Integrate the root block of (B, D, T) features into (B, T, 3) positions
    (x and z start at 0; only velocity differences matter downstream)."""
    root = batch[:, -3:, :]  # (B, 3, T): height, vx, vz
    B, _, T = root.shape
    out = torch.zeros(B, T, 3, dtype=batch.dtype, device=batch.device)
    out[:, :, 1] = root[:, 0]
    for k, axis in ((1, 0), (2, 2)):
        steps = root[:, k, :-1] / fps
        out[:, 1:, axis] = torch.cumsum(steps, dim=1)
    return out


def contact_loss_torch(
    batch: torch.Tensor,
    skeleton: Skeleton,
    num_contacts: int,
    fps: float,
    gain: float = 12.0,
    center: float = 0.5,
) -> torch.Tensor:
    """Foot-contact consistency on a (B, D, T) feature batch: squared foot
    speed weighted by the skewed-sigmoid contact probability."""
    feet = sorted(skeleton.foot_joints)
    if not feet or num_contacts == 0:
        return torch.zeros((), dtype=batch.dtype, device=batch.device)
    B, _, T = batch.shape
    J = skeleton.num_joints
    rotations = rotations_from_features(batch, J)
    root_pos = root_positions_from_features(batch, fps)
    positions = fk_positions_torch(skeleton, rotations, root_pos)  # (B, T, J, 3)
    foot_pos = positions[:, :, feet]
    vel = (foot_pos[:, 1:] - foot_pos[:, :-1]) * fps  # (B, T-1, F, 3)
    speed_sq = (vel**2).sum(-1)
    contacts = batch[:, J * ROTATION_DIMS : J * ROTATION_DIMS + num_contacts]
    probs = torch.sigmoid(gain * (contacts.permute(0, 2, 1)[:, :-1] - center))
    per_sample = (speed_sq * probs).sum(dim=(1, 2)) / (T * len(feet))
    return per_sample.mean()


def contact_loss(
    motion: MotionTensor,
    skeleton: Skeleton,
    gain: float = 12.0,
    center: float = 0.5,
) -> float:
    """Foot-contact consistency of a single decoded motion tensor."""
    batch = torch.from_numpy(motion.data.T.copy()).unsqueeze(0).double()
    return float(
        contact_loss_torch(
            batch, skeleton, motion.num_contacts, motion.fps, gain, center
        )
    )


# ---------------------------------------------------------------------------
# trainer


class Trainer:
    """Owns the optimizers and the per-stage training loops."""

    def __init__(
        self,
        model: PyramidModel,
        motions: list[MotionTensor],
        config: TrainConfig,
        telemetry_path: str | Path | None = None,
    ):
        if len(motions) != model.num_identities:
            raise ValueError("one motion per identity is required")
        self.model = model
        self.config = config
        self.weights = config.weights
        self.device = torch.device(config.device)
        model.to(self.device)

        T = motions[0].num_frames
        full = np.stack([m.data.T for m in motions])  # (B, D, T)
        self.real_full = torch.from_numpy(full).float().to(self.device)
        self.real_levels = {
            stage: resample_time(self.real_full, model.level_spec.stage_length(stage))
            for stage in range(1, NUM_STAGES + 1)
        }
        self.id_maps = {
            stage: constant_id_maps(
                model.num_identities, model.level_spec.stage_length(stage)
            )
            for stage in range(1, NUM_STAGES + 1)
        }
        self.rng = torch.Generator(device="cpu").manual_seed(config.seed + 1)

        self._init_fixed_noise(seed=config.seed + 2)
        self._init_noise_amplitudes()

        lr, betas = config.learning_rate, tuple(config.betas)
        self.gen_opts = [
            torch.optim.Adam(g.parameters(), lr=lr, betas=betas)
            for g in model.generators
        ]
        self.disc_opts = [
            torch.optim.Adam(d.parameters(), lr=lr, betas=betas)
            for d in model.discriminators
        ]

        self._telemetry_file = None
        self._telemetry = None
        if telemetry_path is not None:
            self._telemetry_file = open(telemetry_path, "w", newline="")
            self._telemetry = csv.writer(self._telemetry_file)
            self._telemetry.writerow(TELEMETRY_FIELDS)

    def close(self):
        if self._telemetry_file is not None:
            self._telemetry_file.close()
            self._telemetry_file = None

    def _init_fixed_noise(self, seed: int) -> None:
        # fixed Gaussian draw at the coarsest stage, zero elsewhere
        g = torch.Generator(device="cpu").manual_seed(seed)
        z1 = torch.randn(self.model.z_star(1).shape, generator=g)
        with torch.no_grad():
            self.model.z_star(1).copy_(z1.to(self.device))

    def _init_noise_amplitudes(self) -> None:
        amps = [1.0]
        for stage in range(2, NUM_STAGES + 1):
            cur = self.real_levels[stage]
            prev = resample_time(self.real_levels[stage - 1], cur.shape[-1])
            amps.append(float(((cur - prev) ** 2).mean().sqrt()))
        with torch.no_grad():
            self.model.noise_amplitudes.copy_(torch.tensor(amps, device=self.device))

    # --- generation machinery ------------------------------------------------

    def _stage_noise(self, stage: int) -> torch.Tensor:
        B = self.model.num_identities
        D = self.model.feature_dim
        T_i = self.model.level_spec.stage_length(stage)
        amp = self.model.noise_amplitudes[stage - 1]
        return amp * torch.randn(B, D, T_i, generator=self.rng).to(self.device)

    def _random_fakes(self, stage: int) -> torch.Tensor:
        """Random-mode batch through stages 1..stage; only the target stage's
        generator participates in the autograd graph."""
        x = None
        for s in range(1, stage + 1):
            T_s = self.model.level_spec.stage_length(s)
            noise = self._stage_noise(s)
            ids = self.id_maps[s] if self.model.stage_conditioned(s) else None
            prev = resample_time(x, T_s) if x is not None else None
            if s < stage:
                with torch.no_grad():
                    x = self.model.generator_forward(s, prev, noise, ids)
            else:
                x = self.model.generator_forward(s, prev, noise, ids)
        return x

    # --- one optimizer step ---------------------------------------------------

    def adversarial_step(
        self, stage: int, recon_prefix: torch.Tensor | None
    ) -> dict[str, float]:
        model, w = self.model, self.weights
        real = self.real_levels[stage]
        disc = model.discriminators[stage - 1]

        fake = self._random_fakes(stage)

        # critic: maximize E[D(real)] - E[D(fake)] - gp
        d_real = disc(real).mean()
        d_fake = disc(fake.detach()).mean()
        gp = gradient_penalty(disc, real, fake.detach(), self.rng)
        critic_loss = d_fake - d_real + w.lambda_gp * gp
        self.disc_opts[stage - 1].zero_grad(set_to_none=True)
        critic_loss.backward()
        self.disc_opts[stage - 1].step()

        # generator: adversarial + reconstruction (+ contact at the last stage)
        gen_adv = -disc(fake).mean()
        gen_rec = reconstruction_loss(model, stage, real, prefix=recon_prefix)
        if (
            stage == NUM_STAGES
            and w.lambda_con > 0
            and model.num_contacts > 0
            and model.skeleton.foot_joints
        ):
            gen_con = contact_loss_torch(
                fake,
                model.skeleton,
                model.num_contacts,
                model.fps,
                self.config.contact_sigmoid_gain,
                self.config.contact_sigmoid_center,
            )
        else:
            gen_con = torch.zeros((), device=self.device)
        gen_total = w.lambda_adv * gen_adv + w.lambda_rec * gen_rec
        if stage == NUM_STAGES:
            gen_total = gen_total + w.lambda_con * gen_con
        self.gen_opts[stage - 1].zero_grad(set_to_none=True)
        gen_total.backward()
        self.gen_opts[stage - 1].step()

        # telemetry values composed from the components in python floats so
        # the reported total is exactly the weighted component sum
        adv_v = float(gen_adv.detach())
        rec_v = float(gen_rec.detach())
        con_v = float(gen_con.detach())
        total_v = w.lambda_adv * adv_v + w.lambda_rec * rec_v
        if stage == NUM_STAGES:
            total_v += w.lambda_con * con_v
        gp_v = float(gp.detach())
        wass_v = float(d_real.detach()) - float(d_fake.detach())
        row = {
            "critic_loss": -wass_v + w.lambda_gp * gp_v,
            "wasserstein": wass_v,
            "grad_penalty": gp_v,
            "gen_adv": adv_v,
            "gen_rec": rec_v,
            "gen_contact": con_v,
            "gen_total": total_v,
        }
        for key, value in row.items():
            if not np.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
                raise TrainingDiverged(
                    f"stage {stage}: {key} diverged to {value!r}; "
                    f"telemetry row: {row}"
                )
        return row

    # --- level/stage loops ------------------------------------------------------

    def run(self) -> None:
        spec = self.model.level_spec
        for level in range(1, 5):
            stages = [s for s in range(1, NUM_STAGES + 1) if spec.stage_level(s) == level]
            budget = self.config.iterations_per_level
            base = budget // len(stages)
            counts = [base] * len(stages)
            counts[-1] += budget - base * len(stages)
            iteration = 0
            for stage, count in zip(stages, counts):
                prefix = reconstruction_prefix(self.model, stage)
                for _ in range(count):
                    row = self.adversarial_step(stage, prefix)
                    if self._telemetry is not None:
                        self._telemetry.writerow(
                            [iteration, stage, level]
                            + [repr(row[k]) for k in TELEMETRY_FIELDS[3:]]
                        )
                    iteration += 1
                self.model.trained_stages = max(self.model.trained_stages, stage)
        self.close()


def train(
    config: TrainConfig,
    motions: list[MotionTensor],
    skeleton: Skeleton,
    telemetry_path: str | Path | None = None,
) -> PyramidModel:
    """Train the full pyramid on a batch of equally long motions sharing one
    skeleton; returns the checkpointable model."""
    if len(motions) != len(config.identities):
        raise ValueError(
            f"{len(config.identities)} identities but {len(motions)} motions"
        )
    first = motions[0]
    for m in motions[1:]:
        if (
            m.num_joints != first.num_joints
            or m.num_contacts != first.num_contacts
            or abs(m.fps - first.fps) > 1e-9
        ):
            raise ValueError("all motions must share skeleton layout and fps")
        if m.num_frames != first.num_frames:
            raise ValueError(
                "all motions must share the same frame count for batched "
                f"training (got {first.num_frames} and {m.num_frames}); trim first"
            )
    if skeleton.num_joints != first.num_joints:
        raise ValueError("skeleton does not match the encoded motions")

    level_spec = LevelSpec.for_total_frames(first.num_frames, config.level_ratios)
    model = PyramidModel(
        skeleton=skeleton,
        num_contacts=first.num_contacts,
        fps=first.fps,
        level_spec=level_spec,
        identities=config.identities,
        config=config.model_config(),
        seed=config.seed,
    )
    model.config_hash = config.digest()
    trainer = Trainer(model, motions, config, telemetry_path)
    try:
        trainer.run()
    finally:
        trainer.close()
    model.eval()
    return model
