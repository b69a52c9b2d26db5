import numpy as np
import pytest
import torch

from uqgma.encoder import EncoderConfig, GraphTemporalEncoder, build_encoder, build_graph
from uqgma.oracles import central_difference_gradient
from uqgma.topology import SkeletonTopology, coco17


def tiny_topology(j=5):
    """Structurally valid small skeleton; landmark semantics are irrelevant here."""
    return SkeletonTopology(
        joint_count=j, edges=tuple((i, i + 1) for i in range(j - 1)),
        nose=0, shoulder_left=1, shoulder_right=2, hip_left=3, hip_right=4,
        knee_left=3, knee_right=4, ankle_left=3, ankle_right=4,
    )


def test_build_graph_two_joint_chain():
    topo = SkeletonTopology(
        joint_count=2, edges=((0, 1),),
        nose=0, shoulder_left=0, shoulder_right=1, hip_left=0, hip_right=1,
        knee_left=0, knee_right=1, ankle_left=0, ankle_right=1,
    )
    a = build_graph(topo)
    assert np.allclose(a, [[0.5, 0.5], [0.5, 0.5]])


def test_build_graph_edgeless_is_identity():
    topo = SkeletonTopology(
        joint_count=3, edges=(),
        nose=0, shoulder_left=0, shoulder_right=1, hip_left=0, hip_right=1,
        knee_left=2, knee_right=2, ankle_left=2, ankle_right=2,
    )
    assert np.allclose(build_graph(topo), np.eye(3))


def test_build_graph_symmetric_for_real_topology():
    a = build_graph(coco17())
    assert np.allclose(a, a.T)
    assert np.all(np.diag(a) > 0)


def test_encode_shape_contract():
    topo, _ = coco17().without_joints(set(coco17().facial_indices))
    enc = build_encoder(topo, EncoderConfig())
    enc.eval()
    with torch.no_grad():
        out = enc(torch.randn(8, 300, 13, 2))
    assert out.shape == (8, 256)


def test_encode_eval_deterministic():
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4, 8), temporal_strides=(1, 2), embedding_dim=8))
    enc.eval()
    x = torch.randn(3, 16, 5, 2)
    with torch.no_grad():
        a = enc(x)
        b = enc(x)
    assert torch.equal(a, b)


def test_encode_batch_equivariance():
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4, 8), temporal_strides=(1, 2), embedding_dim=8))
    enc.eval()
    x = torch.randn(5, 12, 5, 2)
    perm = torch.tensor([3, 0, 4, 1, 2])
    with torch.no_grad():
        direct = enc(x)[perm]
        permuted = enc(x[perm])
    assert torch.allclose(direct, permuted, atol=1e-6)


def test_encode_rejects_wrong_joint_count():
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4,), temporal_strides=(1,), embedding_dim=4))
    with pytest.raises(ValueError, match="J="):
        enc(torch.randn(1, 10, 7, 2))


def test_encode_reports_nonfinite_block():
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4, 8), temporal_strides=(1, 1), embedding_dim=4))
    enc.eval()
    with torch.no_grad():
        enc.blocks[1].mix.weight.fill_(float("inf"))
    with pytest.raises(RuntimeError, match="block 1"):
        enc(torch.randn(1, 8, 5, 2))


def test_cyclic_shift_invariance_on_pooling_only_config():
    # with every temporal kernel at 1 the encoder is per-frame + pooling, so
    # rolling the frame axis cannot change the embedding
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4, 8), temporal_kernel=1, temporal_strides=(1, 1), embedding_dim=8))
    enc.eval()
    x = torch.randn(2, 10, 5, 2)
    with torch.no_grad():
        base = enc(x)
        rolled = enc(torch.roll(x, shifts=3, dims=1))
    assert torch.allclose(base, rolled, atol=1e-6)


def test_temporal_convs_break_shift_invariance():
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4, 8), temporal_kernel=5, temporal_strides=(1, 2), embedding_dim=8))
    enc.eval()
    x = torch.randn(2, 16, 5, 2)
    with torch.no_grad():
        base = enc(x)
        rolled = enc(torch.roll(x, shifts=5, dims=1))
    assert not torch.allclose(base, rolled, atol=1e-6)


def test_masked_pooling_matches_single_clip_on_pointwise_config():
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4,), temporal_kernel=1, temporal_strides=(1,), embedding_dim=6))
    enc.eval()
    short = torch.randn(1, 7, 5, 2)
    # right-pad to 12 frames with the last frame and mask down to 7
    padded = torch.cat([short, short[:, -1:].repeat(1, 5, 1, 1)], dim=1)
    with torch.no_grad():
        solo = enc(short)
        masked = enc(padded, lengths=torch.tensor([7]))
    assert torch.allclose(solo, masked, atol=1e-6)


def test_gradient_matches_finite_differences():
    torch.manual_seed(0)
    enc = GraphTemporalEncoder(tiny_topology(), EncoderConfig(
        block_channels=(4, 6), temporal_strides=(1, 2), embedding_dim=8)).double()
    enc.eval()
    w = torch.randn(8, dtype=torch.float64)
    x0 = np.random.default_rng(0).normal(0, 1, (2, 8, 5, 2))

    def scalar_loss(x_np):
        x = torch.tensor(x_np, dtype=torch.float64)
        return float((enc(x) @ w).sum().detach())

    x = torch.tensor(x0, requires_grad=True)
    (enc(x) @ w).sum().backward()
    analytic = x.grad.numpy()
    numeric = central_difference_gradient(scalar_loss, x0.copy(), step=1e-3)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    assert (np.abs(analytic - numeric) / denom).max() < 1e-4


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(temporal_kernel=4)
    with pytest.raises(ValueError):
        EncoderConfig(block_channels=(8, 16), temporal_strides=(1,))
    with pytest.raises(ValueError, match="unknown encoder"):
        build_encoder(coco17(), EncoderConfig(name="transformer"))
