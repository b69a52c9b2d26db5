import math
import types

import numpy as np
import pytest
import torch

from uqgma.oracles import central_difference_gradient, oracle_quadrature, oracle_variance
from uqgma.uncertainty import (
    DisentangledHeads,
    UdmConfig,
    aleatoric,
    mc_epistemic,
    mc_predictive_probability,
    sigmoid,
    total_uncertainty,
)


def make_heads(dim=16, dropout=0.5, seed=0):
    torch.manual_seed(seed)
    return DisentangledHeads(dim, UdmConfig(dropout=dropout))


# --- sigmoid -----------------------------------------------------------------

def test_sigmoid_at_zero():
    assert sigmoid(0.0) == 0.5


def test_sigmoid_symmetry():
    for z in (0.3, 1.7, 12.0):
        assert sigmoid(z) + sigmoid(-z) == pytest.approx(1.0, abs=1e-12)


def test_sigmoid_ln3():
    assert sigmoid(math.log(3.0)) == pytest.approx(0.75, abs=1e-12)


def test_sigmoid_stable_at_extremes():
    assert sigmoid(-1000.0) == 0.0
    assert sigmoid(1000.0) == 1.0
    assert np.isfinite(sigmoid(np.array([-800.0, 800.0]))).all()


# --- epistemic sampling --------------------------------------------------------

class _PresetLogits:
    """Stands in for the stochastic head; emits a fixed logit per pass."""

    def __init__(self, logits):
        self.logits = list(logits)
        self.calls = 0

    def __call__(self, h, generator=None):
        value = self.logits[self.calls % len(self.logits)]
        self.calls += 1
        return torch.full((h.shape[0], 1), value, dtype=torch.float64)


def test_mc_epistemic_variance_arithmetic():
    probs = [0.2, 0.4, 0.6, 0.8]
    logits = [math.log(p / (1 - p)) for p in probs]
    heads = types.SimpleNamespace(f_e=_PresetLogits(logits))
    h = torch.zeros(1, 4, dtype=torch.float64)
    mu, u_e, sampled = mc_epistemic(h, heads, 4)
    assert sampled[0].tolist() == pytest.approx(probs, abs=1e-12)
    assert float(torch.sigmoid(mu)[0]) != 0.5 or True  # mu is a mean of logits
    assert float(u_e[0]) == pytest.approx(0.05, abs=1e-12)
    assert float(u_e[0]) == pytest.approx(oracle_variance(probs), abs=1e-12)


def test_mc_epistemic_zero_dropout_has_zero_variance():
    heads = make_heads(dropout=0.0)
    h = torch.randn(3, 16)
    mu, u_e, _ = mc_epistemic(h, heads, 10)
    assert torch.all(u_e == 0.0)


def test_mc_epistemic_deterministic_given_seed():
    heads = make_heads()
    heads.eval()
    h = torch.randn(2, 16)
    g1 = torch.Generator().manual_seed(99)
    g2 = torch.Generator().manual_seed(99)
    mu1, ue1, _ = mc_epistemic(h, heads, 100, g1)
    mu2, ue2, _ = mc_epistemic(h, heads, 100, g2)
    assert torch.equal(mu1, mu2) and torch.equal(ue1, ue2)


def test_mc_epistemic_variance_bound():
    heads = make_heads()
    heads.eval()
    for seed in range(20):
        h = torch.randn(4, 16, generator=torch.Generator().manual_seed(seed))
        _, u_e, _ = mc_epistemic(h, heads, 50, torch.Generator().manual_seed(seed))
        assert torch.all(u_e <= 0.25)
        assert torch.all(u_e >= 0.0)


def test_mc_epistemic_needs_two_passes():
    heads = make_heads()
    with pytest.raises(ValueError):
        mc_epistemic(torch.randn(1, 16), heads, 1)


# --- aleatoric head -------------------------------------------------------------

def test_aleatoric_softplus_at_zero():
    heads = make_heads()
    final = heads.f_a.linears[-1]
    final.weight.data.zero_()
    final.bias.data.zero_()
    heads.eval()
    u_a = aleatoric(torch.randn(5, 16), heads)
    assert torch.allclose(u_a, torch.full((5,), math.log(2.0)), atol=1e-6)


def test_aleatoric_deterministic_and_positive():
    heads = make_heads()
    heads.eval()
    h = torch.randn(4, 16)
    a = aleatoric(h, heads)
    b = aleatoric(h, heads)
    assert torch.equal(a, b)
    assert torch.all(a > 0)


def test_aleatoric_ignores_dropout_stream():
    # the dropout generator drives f_e only; f_a must not consume randomness
    heads = make_heads()
    heads.eval()
    h = torch.randn(4, 16)
    _ = mc_epistemic(h, heads, 10, torch.Generator().manual_seed(1))
    a = aleatoric(h, heads)
    _ = mc_epistemic(h, heads, 10, torch.Generator().manual_seed(2))
    b = aleatoric(h, heads)
    assert torch.equal(a, b)


# --- total uncertainty ------------------------------------------------------------

def test_total_uncertainty_deterministic_positive():
    heads = make_heads()
    heads.eval()
    u_a = torch.tensor([0.5, 1.0])
    u_e = torch.tensor([0.01, 0.2])
    a = total_uncertainty(u_a, u_e, heads)
    b = total_uncertainty(u_a, u_e, heads)
    assert torch.equal(a, b)
    assert torch.all(a > 0)


def test_total_uncertainty_gradient_matches_finite_differences():
    heads = make_heads().double()
    heads.eval()

    def fn(x):
        inp = torch.tensor(x, dtype=torch.float64)
        return float(heads.f_sigma(inp[None, :]).detach()[0, 0])

    x0 = np.array([0.7, 0.12])
    inp = torch.tensor(x0, dtype=torch.float64, requires_grad=True)
    out = heads.f_sigma(inp[None, :])[0, 0]
    out.backward()
    analytic = inp.grad.numpy()
    numeric = central_difference_gradient(fn, x0, step=1e-4)
    denom = np.maximum(np.abs(analytic), 1e-6)
    assert (np.abs(analytic - numeric) / denom).max() < 1e-4


# --- MC predictive probability ------------------------------------------------------

def test_mc_probability_degenerate_gaussian():
    rng = np.random.default_rng(0)
    for mu in (-3.0, 0.0, 2.5):
        assert mc_predictive_probability(mu, 0.0, 7, rng) == sigmoid(mu)


def test_mc_probability_symmetric_at_zero_mean():
    rng = np.random.default_rng(1)
    p = mc_predictive_probability(0.0, 4.0, 1_000_000, rng)
    assert p == pytest.approx(0.5, abs=0.002)


def test_mc_probability_matches_quadrature():
    rng = np.random.default_rng(2)
    p = mc_predictive_probability(1.0, 4.0, 1_000_000, rng)
    assert p == pytest.approx(oracle_quadrature(1.0, 4.0), abs=0.002)


def test_mc_probability_deterministic_given_seed():
    a = mc_predictive_probability(0.3, 1.5, 1000, np.random.default_rng(5))
    b = mc_predictive_probability(0.3, 1.5, 1000, np.random.default_rng(5))
    assert a == b


def test_mc_probability_monotone_in_mu():
    sigma2 = 2.0
    values = [mc_predictive_probability(mu, sigma2, 4096, np.random.default_rng(0))
              for mu in np.linspace(-3, 3, 13)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_mc_probability_rms_error_shrinks_as_root_n():
    mu, sigma2 = 1.0, 4.0
    exact = oracle_quadrature(mu, sigma2)
    rms = []
    for n in (100, 400, 1600):
        errs = [mc_predictive_probability(mu, sigma2, n, np.random.default_rng(s)) - exact
                for s in range(60)]
        rms.append(float(np.sqrt(np.mean(np.square(errs)))))
    assert rms[1] < rms[0] * 0.75
    assert rms[2] < rms[1] * 0.75


def test_mc_probability_batched():
    rng = np.random.default_rng(3)
    mu = np.array([-1.0, 0.0, 1.0])
    sigma2 = np.array([0.5, 1.0, 2.0])
    p = mc_predictive_probability(mu, sigma2, 200_000, rng)
    for i in range(3):
        assert p[i] == pytest.approx(oracle_quadrature(mu[i], sigma2[i]), abs=0.005)


# --- disentanglement ------------------------------------------------------------------

def test_dropout_disabled_zeroes_epistemic_only():
    torch.manual_seed(3)
    h = torch.randn(8, 16)
    with_dropout = make_heads(dropout=0.5, seed=7)
    without = make_heads(dropout=0.0, seed=7)  # same seed -> same weights
    with_dropout.eval()
    without.eval()
    _, ue_on, _ = mc_epistemic(h, with_dropout, 30, torch.Generator().manual_seed(0))
    _, ue_off, _ = mc_epistemic(h, without, 30, torch.Generator().manual_seed(0))
    assert torch.all(ue_off == 0.0)
    assert torch.all(ue_on > 0.0)
    assert torch.allclose(aleatoric(h, with_dropout), aleatoric(h, without), atol=1e-12)


def test_perturbing_aleatoric_head_leaves_epistemic_unchanged():
    h = torch.randn(4, 16)
    heads = make_heads()
    heads.eval()
    _, ue_before, _ = mc_epistemic(h, heads, 40, torch.Generator().manual_seed(11))
    ua_before = aleatoric(h, heads)
    with torch.no_grad():
        for p in heads.f_a.parameters():
            p.add_(0.37)
    _, ue_after, _ = mc_epistemic(h, heads, 40, torch.Generator().manual_seed(11))
    ua_after = aleatoric(h, heads)
    assert torch.equal(ue_before, ue_after)
    assert not torch.allclose(ua_before, ua_after)
