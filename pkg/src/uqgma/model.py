"""Full network assembly and checkpoint (de)serialization."""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn as nn

from .config import RunConfig, from_dict, to_dict
from .encoder import build_encoder
from .fusion import UncertaintyFusion
from .topology import SkeletonTopology
from .uncertainty import DisentangledHeads

CHECKPOINT_VERSION = 1


class UncertaintyClassifier(nn.Module):
    """Encoder, disentanglement heads and fusion module in one parameter tree."""

    def __init__(self, topology: SkeletonTopology, config: RunConfig):
        super().__init__()
        self.encoder = build_encoder(topology, config.encoder)
        d = config.encoder.embedding_dim
        self.heads = DisentangledHeads(d, config.udm)
        self.fusion = UncertaintyFusion(d, config.ufm)


def build_model(topology: SkeletonTopology, config: RunConfig, seed: int | None = None) -> UncertaintyClassifier:
    """Construct the network; the seed pins the parameter initialization."""
    if seed is not None:
        torch.manual_seed(seed)
    return UncertaintyClassifier(topology, config)


def save_checkpoint(
    path: str | Path,
    model: UncertaintyClassifier,
    config: RunConfig,
    topology: SkeletonTopology,
    meta: dict | None = None,
) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "state_dict": model.state_dict(),
        "config": to_dict(config),
        "topology": topology.to_dict(),
        "meta": meta or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[UncertaintyClassifier, RunConfig, SkeletonTopology, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    config = from_dict(RunConfig, payload["config"])
    topology = SkeletonTopology.from_dict(payload["topology"])
    model = UncertaintyClassifier(topology, config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, config, topology, payload.get("meta", {})
