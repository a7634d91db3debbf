"""Skeleton-aware convolution over the kinematic tree and the modulation
blocks that inject the per-frame motion-identity signal.

Feature maps are (B, channels, T) tensors whose channels are partitioned
into groups: one group per joint, one for the contact labels, and one for
the root features.  A skeleton-aware convolution produces each group's
output from the concatenated channels of its kinematic neighborhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .bvh import Skeleton
from .representation import ROOT_DIMS, ROTATION_DIMS


@dataclass(frozen=True)
class SkeletonNeighborhoods:
    """Per-group neighbor lists (kinematic distance <= d, symmetric).

    Groups 0..J-1 are the joints; group J is the contact block and group
    J+1 the root features, both attached to the root joint's tree node.
    """

    neighbors: tuple[tuple[int, ...], ...]
    num_joints: int

    @property
    def num_groups(self) -> int:
        return len(self.neighbors)


CONTACT_GROUP_OFFSET = 0  # group index J
ROOT_GROUP_OFFSET = 1  # group index J + 1


def build_neighborhoods(skeleton: Skeleton, distance: int) -> SkeletonNeighborhoods:
    """Breadth-first neighborhoods of radius ``distance`` over the joint tree,
    with the contact and root channel groups attached to the root joint."""
    if distance < 0:
        raise ValueError(f"neighborhood distance must be >= 0, got {distance}")
    J = skeleton.num_joints
    num_groups = J + 2
    adjacency: list[set[int]] = [set() for _ in range(num_groups)]
    for i, joint in enumerate(skeleton.joints):
        if joint.parent is not None:
            adjacency[i].add(joint.parent)
            adjacency[joint.parent].add(i)
    root = 0
    for special in (J + CONTACT_GROUP_OFFSET, J + ROOT_GROUP_OFFSET):
        adjacency[special].add(root)
        adjacency[root].add(special)

    neighbors = []
    for g in range(num_groups):
        seen = {g: 0}
        frontier = [g]
        for step in range(distance):
            nxt = []
            for node in frontier:
                for other in adjacency[node]:
                    if other not in seen:
                        seen[other] = step + 1
                        nxt.append(other)
            frontier = nxt
        neighbors.append(tuple(sorted(seen)))
    return SkeletonNeighborhoods(neighbors=tuple(neighbors), num_joints=J)


def motion_channel_widths(num_joints: int, num_contacts: int) -> list[int]:
    """Channel count per group for the raw motion feature layout."""
    return [ROTATION_DIMS] * num_joints + [num_contacts, ROOT_DIMS]


def spread_hidden_widths(total: int, num_groups: int) -> list[int]:
    """Distribute a total hidden width over groups, each getting >= 1."""
    base = max(1, total // num_groups)
    widths = [base] * num_groups
    for i in range(max(0, total - base * num_groups)):
        widths[i % num_groups] += 1
    return widths


def _group_offsets(widths: list[int]) -> list[int]:
    offsets = [0]
    for w in widths:
        offsets.append(offsets[-1] + w)
    return offsets


class SkeletonConv(nn.Module):
    """Temporal convolution whose channel mixing follows the kinematic tree.

    Implemented as one dense Conv1d with a sparsity mask that zeroes every
    weight between groups outside each other's neighborhoods (identical math
    to per-group convolutions, one kernel launch).  Reflection padding keeps
    the frame count unchanged.
    """

    def __init__(
        self,
        neighborhoods: SkeletonNeighborhoods,
        in_widths: list[int],
        out_widths: list[int],
        kernel_size: int = 5,
        bias: bool = True,
    ):
        super().__init__()
        if len(in_widths) != neighborhoods.num_groups or len(out_widths) != (
            neighborhoods.num_groups
        ):
            raise ValueError("per-group widths must match the number of groups")
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {kernel_size}")
        self.neighborhoods = neighborhoods
        self.in_widths = list(in_widths)
        self.out_widths = list(out_widths)
        self.kernel_size = kernel_size
        self.in_offsets = _group_offsets(self.in_widths)
        self.out_offsets = _group_offsets(self.out_widths)

        self.weight = nn.Parameter(torch.zeros(self.total_out, self.total_in, kernel_size))
        self.bias = nn.Parameter(torch.zeros(self.total_out)) if bias else None
        mask = torch.zeros(self.total_out, self.total_in, 1)
        for g, nbrs in enumerate(neighborhoods.neighbors):
            rows = slice(self.out_offsets[g], self.out_offsets[g + 1])
            for n in nbrs:
                mask[rows, self.in_offsets[n] : self.in_offsets[n + 1]] = 1.0
        self.register_buffer("mask", mask)

    @property
    def total_in(self) -> int:
        return self.in_offsets[-1]

    @property
    def total_out(self) -> int:
        return self.out_offsets[-1]

    def weight_block(self, group: int, neighbor: int) -> torch.Tensor:
        """View of the kernel mapping ``neighbor`` channels to ``group``."""
        if neighbor not in self.neighborhoods.neighbors[group]:
            raise ValueError(f"group {neighbor} is not in the neighborhood of {group}")
        return self.weight[
            self.out_offsets[group] : self.out_offsets[group + 1],
            self.in_offsets[neighbor] : self.in_offsets[neighbor + 1],
        ]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.total_in:
            raise ValueError(f"expected {self.total_in} channels, got {x.shape[1]}")
        pad = self.kernel_size // 2
        xp = F.pad(x, (pad, pad), mode="reflect") if pad else x
        return F.conv1d(xp, self.weight * self.mask, self.bias)

    # --- initialization helpers -------------------------------------------

    def init_random(self, generator: torch.Generator, gain: float = 1.0) -> None:
        """Kaiming-style normal init (per-group fan-in) from an explicit
        generator; weights outside neighborhoods stay zero."""
        with torch.no_grad():
            self.weight.zero_()
            if self.bias is not None:
                self.bias.zero_()
            for g, nbrs in enumerate(self.neighborhoods.neighbors):
                if self.out_widths[g] == 0:
                    continue
                fan_in = sum(self.in_widths[n] for n in nbrs) * self.kernel_size
                if fan_in == 0:
                    continue
                std = gain * math.sqrt(2.0 / ((1 + 0.2**2) * fan_in))
                for n in nbrs:
                    block = self.weight_block(g, n)
                    if block.numel():
                        block.copy_(
                            torch.randn(block.shape, generator=generator) * std
                        )

    def init_zero(self, bias_value: float = 0.0) -> None:
        with torch.no_grad():
            self.weight.zero_()
            if self.bias is not None:
                self.bias.fill_(bias_value)

    def init_identity(self) -> None:
        """Center-tap passthrough of each group's own channels (requires
        matching in/out widths)."""
        if self.in_widths != self.out_widths:
            raise ValueError("identity init needs equal in/out widths")
        center = self.kernel_size // 2
        with torch.no_grad():
            self.weight.zero_()
            if self.bias is not None:
                self.bias.zero_()
            for g in range(self.neighborhoods.num_groups):
                w = self.out_widths[g]
                if w:
                    self.weight_block(g, g)[:, :, center] = torch.eye(w)


# ---------------------------------------------------------------------------
# identity maps and modulation


@dataclass
class SkeletonIdMap:
    """Per-frame motion-identity labels driving the conditional blending.

    Stored as one integer label per frame (piecewise constant within blend
    segments); the one-hot expansion happens inside the modulation block's
    embedding layer.
    """

    labels: np.ndarray  # (T,) int64
    num_identities: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValueError("id map labels must be 1-D (one label per frame)")
        if self.num_identities < 1:
            raise ValueError("need at least one identity")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.num_identities
        ):
            raise ValueError(
                f"labels must lie in [0, {self.num_identities}); "
                f"got range [{self.labels.min()}, {self.labels.max()}]"
            )

    @property
    def num_frames(self) -> int:
        return self.labels.shape[0]

    def resample(self, target_frames: int) -> "SkeletonIdMap":
        """Nearest-frame resampling; labels stay valid one-hot identities."""
        T = self.num_frames
        if target_frames == T:
            return SkeletonIdMap(self.labels.copy(), self.num_identities)
        grid = np.linspace(0.0, T - 1, target_frames)
        idx = np.round(grid).astype(int)
        return SkeletonIdMap(self.labels[idx], self.num_identities)

    def one_hot(self, dtype=torch.float32, device=None) -> torch.Tensor:
        """(num_identities, T) one-hot planes."""
        out = torch.zeros(self.num_identities, self.num_frames, dtype=dtype, device=device)
        out[torch.as_tensor(self.labels, device=device), torch.arange(self.num_frames, device=device)] = 1
        return out

    def as_matrix(self, num_channels: int) -> np.ndarray:
        """(T, num_channels) view with the normalized label broadcast across
        channels, matching the channel-shaped conditioning tensor."""
        denom = max(self.num_identities - 1, 1)
        col = self.labels.astype(np.float32) / denom
        return np.repeat(col[:, None], num_channels, axis=1)

    @staticmethod
    def constant(label: int, num_frames: int, num_identities: int) -> "SkeletonIdMap":
        return SkeletonIdMap(np.full(num_frames, label), num_identities)


class ModulationBlock(nn.Module):
    """Scale/shift conditioning from the identity map: out = gamma * x + beta.

    A shared skeleton-conv embedding of the one-hot identity planes feeds two
    skeleton-conv heads predicting gamma and beta.  No normalization is
    applied to the features before modulation.  ``kernel_size=1`` gives the
    per-frame linear (FiLM) variant.
    """

    def __init__(
        self,
        neighborhoods: SkeletonNeighborhoods,
        feature_widths: list[int],
        num_identities: int,
        kernel_size: int = 5,
        embed_widths: list[int] | None = None,
    ):
        super().__init__()
        self.num_identities = num_identities
        if embed_widths is None:
            embed_widths = list(feature_widths)
        id_widths = [num_identities] * neighborhoods.num_groups
        self.embed = SkeletonConv(neighborhoods, id_widths, embed_widths, kernel_size)
        self.gamma_head = SkeletonConv(neighborhoods, embed_widths, feature_widths, kernel_size)
        self.beta_head = SkeletonConv(neighborhoods, embed_widths, feature_widths, kernel_size)
        self.act = nn.LeakyReLU(0.2)
        self.init_identity_modulation()

    def init_identity_modulation(self) -> None:
        """gamma == 1, beta == 0 regardless of the id map (training start)."""
        self.gamma_head.init_zero(bias_value=1.0)
        self.beta_head.init_zero(bias_value=0.0)

    def init_random_embedding(self, generator: torch.Generator) -> None:
        self.embed.init_random(generator)

    def _id_planes(self, id_map: SkeletonIdMap, like: torch.Tensor) -> torch.Tensor:
        onehot = id_map.one_hot(dtype=like.dtype, device=like.device)  # (B_id, T)
        tiled = onehot.repeat(self.embed.neighborhoods.num_groups, 1)
        return tiled.unsqueeze(0).expand(like.shape[0], -1, -1)

    def forward(self, features: torch.Tensor, id_map) -> torch.Tensor:
        """``id_map`` is a SkeletonIdMap at the feature map's frame count, or a
        list of them (one per batch element)."""
        maps = id_map if isinstance(id_map, (list, tuple)) else [id_map]
        if len(maps) not in (1, features.shape[0]):
            raise ValueError("need one id map, or one per batch element")
        for m in maps:
            if m.num_frames != features.shape[2]:
                raise ValueError(
                    f"id map has {m.num_frames} frames, features have "
                    f"{features.shape[2]}"
                )
        if len(maps) == 1:
            planes = self._id_planes(maps[0], features)
        else:
            planes = torch.cat(
                [self._id_planes(m, features[:1]) for m in maps], dim=0
            )
        e = self.act(self.embed(planes))
        gamma = self.gamma_head(e)
        beta = self.beta_head(e)
        return gamma * features + beta


def spade_block(
    neighborhoods: SkeletonNeighborhoods,
    feature_widths: list[int],
    num_identities: int,
    kernel_size: int = 5,
) -> ModulationBlock:
    """Convolutional (position-dependent) modulation block."""
    return ModulationBlock(neighborhoods, feature_widths, num_identities, kernel_size)


def film_block(
    neighborhoods: SkeletonNeighborhoods,
    feature_widths: list[int],
    num_identities: int,
) -> ModulationBlock:
    """Per-frame linear modulation block (temporal extent 1)."""
    return ModulationBlock(neighborhoods, feature_widths, num_identities, kernel_size=1)
