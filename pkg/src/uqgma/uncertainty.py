"""Disentangled uncertainty estimation on top of the motion embedding.

Three heads: a stochastic logit head whose dropout stays active at inference
(its forward passes sample the approximate weight posterior), a deterministic
positive head for data uncertainty, and a small positive head that maps the
two uncertainties to the variance of the logit distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .heads import MLPHead


@dataclass
class UdmConfig:
    T_train: int = 10
    T_eval: int = 100
    N: int = 100
    dropout: float = 0.5
    head_hidden: tuple[int, ...] | None = None  # None -> (D//2, D//4)
    sigma_hidden: tuple[int, ...] = (16,)
    # batch norm inside the f_e/f_a blocks; off by default because its scale
    # dynamics at batch size 8 destabilize the encoder at the hot base lr
    batch_norm: bool = False

    def __post_init__(self):
        if self.T_train < 2 or self.T_eval < 2:
            raise ValueError("T_train and T_eval must be >= 2")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must be a probability")


class DisentangledHeads(nn.Module):
    """f_e (stochastic logit), f_a (aleatoric) and f_sigma (total variance)."""

    def __init__(self, embedding_dim: int, config: UdmConfig | None = None):
        super().__init__()
        cfg = config or UdmConfig()
        self.config = cfg
        hidden = cfg.head_hidden or (embedding_dim // 2, embedding_dim // 4)
        self.f_e = MLPHead(embedding_dim, hidden, 1, batch_norm=cfg.batch_norm,
                           dropout=cfg.dropout, dropout_always=True)
        self.f_a = MLPHead(embedding_dim, hidden, 1, batch_norm=cfg.batch_norm,
                           dropout=0.0, output_activation="softplus")
        self.f_sigma = MLPHead(2, cfg.sigma_hidden, 1, batch_norm=False,
                               dropout=0.0, output_activation="softplus")


def sigmoid(z):
    """Numerically stable logistic function for floats or arrays."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


def mc_epistemic(
    h: torch.Tensor,
    heads: DisentangledHeads,
    t_samples: int,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """T stochastic passes of the logit head.

    Returns (mu, u_e, sampled_probs) with shapes (B,), (B,), (B, T). mu keeps
    the gradient of every pass; u_e is the population variance of the sampled
    probabilities and is detached (it is a statistic, not a learnable path).
    """
    if t_samples < 2:
        raise ValueError("need at least 2 stochastic passes")
    logits = torch.stack(
        [heads.f_e(h, generator=generator).squeeze(-1) for _ in range(t_samples)], dim=1
    )  # (B, T)
    if not torch.isfinite(logits).all():
        raise RuntimeError("non-finite logit in a stochastic pass")
    mu = logits.mean(dim=1)
    with torch.no_grad():
        probs = torch.sigmoid(logits.detach())
        u_e = probs.var(dim=1, unbiased=False)
    return mu, u_e, probs


def aleatoric(h: torch.Tensor, heads: DisentangledHeads) -> torch.Tensor:
    """Strictly positive data-uncertainty estimate, deterministic in every mode."""
    out = heads.f_a(h).squeeze(-1)
    if not torch.isfinite(out).all():
        raise RuntimeError("non-finite aleatoric output")
    return out


def total_uncertainty(u_a: torch.Tensor, u_e: torch.Tensor, heads: DisentangledHeads) -> torch.Tensor:
    """Variance of the logit distribution as a learned function of (U_a, U_e)."""
    return heads.f_sigma(torch.stack([u_a, u_e], dim=-1)).squeeze(-1)


def mc_predictive_probability(
    mu, sigma2, n_samples: int, rng: np.random.Generator
) -> float | np.ndarray:
    """Monte Carlo integral of sigmoid over Normal(mu, sigma2), via numpy.

    mu and sigma2 may be scalars or broadcastable arrays; one epsilon draw of
    shape (..., n_samples) is consumed from rng either way.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if (sigma2 < 0).any():
        raise ValueError("sigma2 must be >= 0")
    shape = np.broadcast_shapes(mu.shape, sigma2.shape) + (n_samples,)
    eps = rng.standard_normal(shape)
    z = mu[..., None] + np.sqrt(sigma2)[..., None] * eps
    p = sigmoid(z).mean(axis=-1)
    # a zero-variance logit is deterministic; bypass the averaging round-off
    p = np.where(np.broadcast_to(sigma2, p.shape) == 0.0,
                 sigmoid(np.broadcast_to(mu, p.shape)), p)
    return float(p) if p.ndim == 0 else p


def mc_predictive_probability_torch(
    mu: torch.Tensor, sigma2: torch.Tensor, n_samples: int,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Differentiable counterpart used in training; epsilons are constants."""
    eps = torch.randn(*mu.shape, n_samples, generator=generator, dtype=mu.dtype, device=mu.device)
    z = mu[..., None] + torch.sqrt(sigma2)[..., None] * eps
    return torch.sigmoid(z).mean(dim=-1)
