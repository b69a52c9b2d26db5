"""MLP heads shared by the uncertainty and fusion modules."""

from __future__ import annotations

import torch
import torch.nn as nn


class MonteCarloDropout(nn.Module):
    """Inverted dropout with an explicit generator.

    With always_active the mask is applied in eval mode too, which is what
    turns repeated forward passes into posterior samples.
    """

    def __init__(self, p: float, always_active: bool = False):
        super().__init__()
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"dropout probability must be in [0, 1], got {p}")
        self.p = p
        self.always_active = always_active

    def forward(self, x: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
        if self.p == 0.0 or not (self.training or self.always_active):
            return x
        if self.p >= 1.0:
            return torch.zeros_like(x)
        mask = torch.rand(x.shape, generator=generator, device=x.device, dtype=x.dtype) >= self.p
        return x * mask.to(x.dtype) / (1.0 - self.p)

    def extra_repr(self) -> str:
        return f"p={self.p}, always_active={self.always_active}"


class MLPHead(nn.Module):
    """Stack of Linear blocks with optional batch norm and dropout.

    Two dropout placements are supported: `post` puts it after the block
    activation (linear -> BN -> ReLU -> dropout); `input` puts it before
    every linear layer, so dropout probability 1 reduces the head to its
    bias pathway.
    """

    def __init__(
        self,
        in_dim: int,
        hidden: tuple[int, ...],
        out_dim: int = 1,
        batch_norm: bool = False,
        dropout: float = 0.0,
        dropout_always: bool = False,
        dropout_position: str = "post",  # post | input
        output_activation: str | None = None,  # softplus | relu | None
    ):
        super().__init__()
        if dropout_position not in ("post", "input"):
            raise ValueError(f"dropout_position must be post|input, got {dropout_position!r}")
        self.dropout_position = dropout_position
        self.output_activation = output_activation
        self.linears = nn.ModuleList()
        self.norms = nn.ModuleList()
        self.dropouts = nn.ModuleList()
        dims = [in_dim, *hidden, out_dim]
        for i in range(len(dims) - 1):
            self.linears.append(nn.Linear(dims[i], dims[i + 1]))
            is_hidden = i < len(dims) - 2
            self.norms.append(nn.BatchNorm1d(dims[i + 1]) if batch_norm and is_hidden else nn.Identity())
            use_drop = dropout > 0.0 and (is_hidden if dropout_position == "post" else True)
            self.dropouts.append(
                MonteCarloDropout(dropout, dropout_always) if use_drop else nn.Identity()
            )

    def _drop(self, i: int, x: torch.Tensor, generator: torch.Generator | None) -> torch.Tensor:
        layer = self.dropouts[i]
        if isinstance(layer, MonteCarloDropout):
            return layer(x, generator)
        return x

    def forward(self, x: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
        last = len(self.linears) - 1
        for i, linear in enumerate(self.linears):
            if self.dropout_position == "input":
                x = self._drop(i, x, generator)
            x = linear(x)
            if i < last:
                x = torch.relu(self.norms[i](x))
                if self.dropout_position == "post":
                    x = self._drop(i, x, generator)
        if self.output_activation == "softplus":
            # softplus underflows to exactly 0 in float32 near -104; keep the
            # strict-positivity contract with a tiny floor
            x = nn.functional.softplus(x).clamp_min(1e-12)
        elif self.output_activation == "relu":
            x = torch.relu(x)
        return x
