"""Fusion of the motion embedding with the two uncertainty estimates.

The epistemic scalar is folded in through two refinement MLPs; the aleatoric
scalar multiplies the embedding directly (it is a property of the data) and
the product is refined once. Dropout in these heads is active in training
only. Two ablation modes exist: "none" bypasses fusion and uses the
MC-integrated probability, "upr" refines with a weighted sum of the two
uncertainties instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .heads import MLPHead

FUSION_MODES = ("ufm", "none", "upr")


@dataclass
class UfmConfig:
    mode: str = "ufm"
    dropout: float = 0.5
    widths: dict | None = None  # optional override: {"classifier_hidden": [..]}
    upr_weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.mode not in FUSION_MODES:
            raise ValueError(f"mode must be one of {FUSION_MODES}, got {self.mode!r}")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must be a probability")


class UncertaintyFusion(nn.Module):
    def __init__(self, embedding_dim: int, config: UfmConfig | None = None):
        super().__init__()
        cfg = config or UfmConfig()
        self.config = cfg
        d = embedding_dim
        widths = cfg.widths or {}
        classifier_hidden = tuple(widths.get("classifier_hidden", (max(d // 4, 1),)))
        # refinement heads drop their inputs (probability 1 reduces them to the
        # bias pathway); the classifier uses block-style post-activation dropout
        drop = dict(dropout=cfg.dropout, dropout_position="input")
        self.refine_e1 = MLPHead(d + 1, (), d, output_activation="relu", **drop)
        self.refine_e2 = MLPHead(2 * d, (), d, output_activation="relu", **drop)
        self.refine_a = MLPHead(2 * d, (), d, output_activation="relu", **drop)
        self.classifier = MLPHead(2 * d, classifier_hidden, 1,
                                  dropout=cfg.dropout, dropout_position="post")

    def fuse_epistemic(
        self, h: torch.Tensor, u_e: torch.Tensor, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        h_e = self.refine_e1(torch.cat([h, u_e[..., None]], dim=-1), generator)
        return self.refine_e2(torch.cat([h, h_e], dim=-1), generator)

    def fuse_aleatoric(
        self, h: torch.Tensor, u_a: torch.Tensor, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        h_a = h * u_a[..., None]
        return self.refine_a(torch.cat([h, h_a], dim=-1), generator)

    def classify(
        self, h_e: torch.Tensor, h_a: torch.Tensor, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        logit = self.classifier(torch.cat([h_e, h_a], dim=-1), generator).squeeze(-1)
        return torch.sigmoid(logit)

    def forward(
        self,
        h: torch.Tensor,
        u_e: torch.Tensor,
        u_a: torch.Tensor,
        p_mc: torch.Tensor | None = None,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        """Final probability of the positive class, shape (B,)."""
        mode = self.config.mode
        if mode == "none":
            if p_mc is None:
                raise ValueError("fusion mode 'none' needs the MC-integrated probability")
            return p_mc
        if mode == "upr":
            w_e, w_a = self.config.upr_weights
            u = w_e * u_e + w_a * u_a
            refined = h * u[..., None]
            logit = self.classifier(torch.cat([h, refined], dim=-1), generator).squeeze(-1)
            return torch.sigmoid(logit)
        h_e = self.fuse_epistemic(h, u_e, generator)
        h_a = self.fuse_aleatoric(h, u_a, generator)
        return self.classify(h_e, h_a, generator)


def fuse_epistemic(h, u_e, fusion: UncertaintyFusion, generator=None):
    return fusion.fuse_epistemic(h, u_e, generator)


def fuse_aleatoric(h, u_a, fusion: UncertaintyFusion, generator=None):
    return fusion.fuse_aleatoric(h, u_a, generator)


def classify(h_e, h_a, fusion: UncertaintyFusion, generator=None):
    return fusion.classify(h_e, h_a, generator)
