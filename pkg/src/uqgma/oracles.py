"""Slow, unambiguous reference computations used to cross-check the fast paths.

Everything here is written the naive way on purpose (explicit loops, pair
counting, adaptive quadrature) and shares no code with the implementations
it checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .metrics import PredictionRecord


def oracle_variance(values) -> float:
    """Population variance (divide by N), computed with explicit loops."""
    vals = list(values)
    n = len(vals)
    if n == 0:
        raise ValueError("no values")
    mean = sum(vals) / n
    return sum((v - mean) ** 2 for v in vals) / n


def oracle_auc(records: list[PredictionRecord]) -> float:
    """AUC-ROC by O(n^2) pair counting with half credit for ties, in percent."""
    pos = [r.p_f for r in records if r.y_true == 1]
    neg = [r.p_f for r in records if r.y_true == 0]
    if not pos or not neg:
        raise ValueError("oracle_auc needs both classes")
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return 100.0 * wins / (len(pos) * len(neg))


def oracle_ua(records: list[PredictionRecord], u_t: float, which: str = "epistemic") -> float:
    """Uncertainty accuracy by explicit four-category enumeration, in percent."""
    raw = [r.estimate.value(which) for r in records]
    lo, hi = min(raw), max(raw)
    norm = [0.0 if hi == lo else (u - lo) / (hi - lo) for u in raw]
    n_cc = n_iu = n_cu = n_ic = 0
    for r, u in zip(records, norm):
        correct = (1 if r.p_f >= 0.5 else 0) == r.y_true
        uncertain = u >= u_t
        if correct and not uncertain:
            n_cc += 1
        elif correct and uncertain:
            n_cu += 1
        elif not correct and uncertain:
            n_iu += 1
        else:
            n_ic += 1
    total = n_cc + n_iu + n_cu + n_ic
    if total == 0:
        raise ValueError("no records")
    return 100.0 * (n_cc + n_iu) / total


def oracle_auc_ua(
    records: list[PredictionRecord], which: str = "epistemic", grid_points: int = 10001
) -> float:
    """Fine-grid trapezoidal area under the UA curve, in percent.

    Category counting is broadcast over the whole grid at once; a pure-python
    grid at 10^4 points would dominate the test-suite runtime.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    raw = np.array([r.estimate.value(which) for r in records], dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    norm = np.zeros_like(raw) if hi == lo else (raw - lo) / (hi - lo)
    correct = np.array([(1 if r.p_f >= 0.5 else 0) == r.y_true for r in records])
    uncertain = norm[None, :] >= grid[:, None]  # (grid, records)
    desired = (correct[None, :] & ~uncertain) | (~correct[None, :] & uncertain)
    ua = 100.0 * desired.mean(axis=1)
    area = 0.0
    for i in range(len(grid) - 1):
        area += 0.5 * (ua[i] + ua[i + 1]) * (grid[i + 1] - grid[i])
    return float(area)


def _stable_sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def oracle_quadrature(mu: float, sigma2: float) -> float:
    """Exact predictive probability: integral of sigmoid(z) * Normal(z; mu, sigma2)."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    if sigma2 == 0:
        return _stable_sigmoid(mu)
    sigma = math.sqrt(sigma2)

    def integrand(z: float) -> float:
        return _stable_sigmoid(z) * math.exp(-0.5 * ((z - mu) / sigma) ** 2) / (
            sigma * math.sqrt(2.0 * math.pi)
        )

    value, _ = quad(integrand, mu - 40.0 * sigma, mu + 40.0 * sigma,
                    limit=400, epsabs=1e-13, epsrel=1e-13)
    return value


def central_difference_gradient(fn, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Central finite-difference gradient of a scalar function, element by element."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn(x)
        flat[i] = orig - step
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad
