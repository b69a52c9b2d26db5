"""Graph-temporal convolutional encoder from pose sequences to embeddings.

The encoder is a named plug-in behind `build_encoder`, so an alternative
backbone can be dropped in without touching the rest of the pipeline. The
reference implementation stacks blocks of (graph convolution over joints ->
temporal convolution over frames -> ReLU), then masked global average
pooling and a linear map to the embedding width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .topology import SkeletonTopology


@dataclass
class EncoderConfig:
    name: str = "graph_temporal"
    block_channels: tuple[int, ...] = (16, 32, 64, 128)
    temporal_kernel: int = 5
    temporal_strides: tuple[int, ...] = (1, 2, 2, 2)
    embedding_dim: int = 256

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if len(self.block_channels) != len(self.temporal_strides):
            raise ValueError("block_channels and temporal_strides must have the same length")
        if self.temporal_kernel < 1 or self.temporal_kernel % 2 == 0:
            raise ValueError("temporal_kernel must be odd and >= 1")
        if any(s < 1 for s in self.temporal_strides):
            raise ValueError("temporal strides must be >= 1")


def build_graph(topology: SkeletonTopology) -> np.ndarray:
    """Symmetrically normalized adjacency with self-loops: D^-1/2 (A+I) D^-1/2."""
    a = topology.adjacency() + np.eye(topology.joint_count)
    d = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


class GraphTemporalBlock(nn.Module):
    """Graph conv over joints, temporal conv over frames, with a residual path.

    The residual keeps deep stacks trainable at the high base learning rate;
    it is a 1x1 strided projection whenever channels or stride change.
    """

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int):
        super().__init__()
        self.mix = nn.Conv2d(c_in, c_out, kernel_size=1)
        self.bn_spatial = nn.BatchNorm2d(c_out)
        self.temporal = nn.Conv2d(
            c_out, c_out, kernel_size=(kernel, 1), stride=(stride, 1),
            padding=(kernel // 2, 0),
        )
        self.bn_temporal = nn.BatchNorm2d(c_out)
        self.stride = stride
        if c_in == c_out and stride == 1:
            self.residual = nn.Identity()
        else:
            self.residual = nn.Sequential(
                nn.Conv2d(c_in, c_out, kernel_size=1, stride=(stride, 1)),
                nn.BatchNorm2d(c_out),
            )

    def forward(self, x: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        # x: (B, C, M, J); aggregate neighbours, mix channels, then filter in time
        skip = self.residual(x)
        x = torch.einsum("bcmj,jk->bcmk", x, adjacency)
        x = torch.relu(self.bn_spatial(self.mix(x)))
        x = self.bn_temporal(self.temporal(x))
        return torch.relu(x + skip)


class GraphTemporalEncoder(nn.Module):
    def __init__(self, topology: SkeletonTopology, config: EncoderConfig | None = None):
        super().__init__()
        cfg = config or EncoderConfig()
        self.config = cfg
        self.joint_count = topology.joint_count
        self.channel_count = topology.channel_count
        adjacency = torch.from_numpy(build_graph(topology))
        self.register_buffer("adjacency", adjacency.to(torch.get_default_dtype()))
        self.input_norm = nn.BatchNorm1d(topology.channel_count * topology.joint_count)
        channels = [topology.channel_count, *cfg.block_channels]
        self.blocks = nn.ModuleList([
            GraphTemporalBlock(channels[i], channels[i + 1], cfg.temporal_kernel, cfg.temporal_strides[i])
            for i in range(len(cfg.block_channels))
        ])
        self.project = nn.Linear(cfg.block_channels[-1], cfg.embedding_dim)

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim

    def forward(self, frames: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:
        """frames: (B, M, J, C) -> embeddings (B, D). lengths masks padded frames."""
        if frames.ndim != 4:
            raise ValueError(f"expected a B x M x J x C batch, got shape {tuple(frames.shape)}")
        b, m, j, c = frames.shape
        if j != self.joint_count or c != self.channel_count:
            raise ValueError(
                f"batch has J={j}, C={c}; encoder was built for J={self.joint_count}, "
                f"C={self.channel_count}"
            )
        if lengths is None:
            mask = torch.ones(b, m, dtype=torch.bool, device=frames.device)
        else:
            mask = torch.arange(m, device=frames.device)[None, :] < lengths[:, None]
        x = frames.permute(0, 3, 1, 2)  # (B, C, M, J)
        flat = x.permute(0, 1, 3, 2).reshape(b, c * j, m)  # one feature per (channel, joint)
        x = self.input_norm(flat).reshape(b, c, j, m).permute(0, 1, 3, 2)
        for i, block in enumerate(self.blocks):
            x = block(x, self.adjacency)
            mask = mask[:, :: block.stride]
            if not torch.isfinite(x).all():
                raise RuntimeError(f"non-finite activations in encoder block {i}")
        weights = mask.to(x.dtype)[:, None, :, None]  # (B, 1, M', 1)
        pooled = (x * weights).sum(dim=(2, 3)) / (weights.sum(dim=(2, 3)) * x.shape[3])
        return self.project(pooled)


ENCODERS = {"graph_temporal": GraphTemporalEncoder}


def build_encoder(topology: SkeletonTopology, config: EncoderConfig | None = None) -> nn.Module:
    cfg = config or EncoderConfig()
    if cfg.name not in ENCODERS:
        raise ValueError(f"unknown encoder {cfg.name!r}; available: {sorted(ENCODERS)}")
    return ENCODERS[cfg.name](topology, cfg)
