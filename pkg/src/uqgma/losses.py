"""Training objectives.

`loss_unc` supervises the MC-integrated probability and penalizes the learnt
variance so it cannot inflate as a shortcut; `loss_total` combines it with
the plain BCE on the fused prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

PROB_EPS = 1e-7
SIGMA2_CLAMP = 20.0  # expm1(20) already dwarfs any clamped BCE value
PENALTY_VARIANTS = ("exp", "l2", "none")


@dataclass
class LossConfig:
    lambda0: float = 1.0
    lambda1: float = 1.0
    penalty: str = "exp"
    use_l_mu: bool = False

    def __post_init__(self):
        if self.penalty not in PENALTY_VARIANTS:
            raise ValueError(f"penalty must be one of {PENALTY_VARIANTS}, got {self.penalty!r}")
        if self.lambda0 < 0 or self.lambda1 < 0:
            raise ValueError("lambda0 and lambda1 must be >= 0")


def bce(p, y) -> torch.Tensor:
    """Mean binary cross-entropy with the probability clamped away from 0 and 1."""
    p = torch.as_tensor(p, dtype=torch.float64 if not torch.is_tensor(p) else None)
    y = torch.as_tensor(y, dtype=p.dtype, device=p.device)
    p = torch.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    return (-(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))).mean()


def penalty(sigma2, variant: str = "exp") -> torch.Tensor:
    """Mean uncertainty penalty; sigma2 is clamped before the exponential."""
    sigma2 = torch.as_tensor(sigma2, dtype=torch.float64 if not torch.is_tensor(sigma2) else None)
    if variant == "exp":
        return torch.expm1(torch.clamp(sigma2, 0.0, SIGMA2_CLAMP)).mean()
    if variant == "l2":
        return (0.5 * sigma2).mean()
    if variant == "none":
        return torch.zeros((), dtype=sigma2.dtype, device=sigma2.device)
    raise ValueError(f"unknown penalty variant {variant!r}")


def loss_unc(p, y, sigma2, lambda0: float = 1.0, penalty_variant: str = "exp") -> torch.Tensor:
    return bce(p, y) + lambda0 * penalty(sigma2, penalty_variant)


def _as_tensor(x) -> torch.Tensor:
    return x if torch.is_tensor(x) else torch.as_tensor(x, dtype=torch.float64)


def loss_total(l_cls, l_unc, lambda1: float = 1.0, l_mu=None) -> torch.Tensor:
    total = _as_tensor(l_cls) + lambda1 * _as_tensor(l_unc)
    if l_mu is not None:
        total = total + _as_tensor(l_mu)
    return total
