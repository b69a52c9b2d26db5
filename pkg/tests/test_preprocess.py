import numpy as np
import pytest

from conftest import random_clip
from uqgma.data import PoseSequence
from uqgma.preprocess import (
    PreprocessConfig,
    align_trunk,
    body_height,
    center_on_hips,
    drop_facial_landmarks,
    median_smooth,
    median_window_frames,
    normalize_height,
    preprocess_pipeline,
    trunk_length,
)
from uqgma.topology import coco17


def _clip(frames, fps=10.0):
    return PoseSequence("t0", "s0", fps, np.asarray(frames, dtype=np.float64), 0)


# --- median smoothing ---------------------------------------------------

def test_median_window_rounding():
    assert median_window_frames(0.5, 10.0) == 5
    assert median_window_frames(0.3, 10.0) == 3
    assert median_window_frames(0.4, 10.0) == 5  # 4 rounds up to the next odd
    assert median_window_frames(0.1, 30.0) == 3


def test_median_removes_spike():
    frames = np.zeros((5, 17, 2))
    frames[2, 0, 0] = 10.0
    out = median_smooth(_clip(frames), 0.5)
    assert out.frames[2, 0, 0] == 0.0


def test_median_constant_unchanged():
    frames = np.full((9, 17, 2), 3.25)
    out = median_smooth(_clip(frames), 0.5)
    assert np.array_equal(out.frames, frames)


def test_median_reflect_boundary_hand_oracle():
    frames = np.zeros((5, 17, 2))
    frames[:, 0, 0] = [1, 2, 3, 4, 5]
    out = median_smooth(_clip(frames), 0.5)
    # reflected: [3,2,|1,2,3,4,5|,4,3]; first window [3,2,1,2,3] -> 2
    assert out.frames[0, 0, 0] == 2.0
    assert out.frames[1, 0, 0] == 2.0
    assert out.frames[2, 0, 0] == 3.0


def test_median_too_short_raises():
    frames = np.zeros((3, 17, 2))
    with pytest.raises(ValueError, match="shorter"):
        median_smooth(_clip(frames), 0.5)


# --- hip centring -------------------------------------------------------

def test_center_exact_midpoint():
    topo = coco17()
    frames = np.zeros((1, 17, 2))
    frames[0, topo.hip_left] = [3.0, 4.0]
    frames[0, topo.hip_right] = [5.0, 6.0]
    frames[0, 0] = [4.0, 5.0]
    out = center_on_hips(_clip(frames), topo)
    assert np.allclose(topo.hip_center(out.frames), 0.0)
    assert np.array_equal(out.frames[0, 0], [0.0, 0.0])


def test_center_idempotent(rng):
    topo = coco17()
    seq = random_clip(rng)
    once = center_on_hips(seq, topo)
    twice = center_on_hips(once, topo)
    # the second pass only removes the ~1e-16 rounding residue of the first
    assert np.allclose(once.frames, twice.frames, atol=1e-9)


# --- trunk alignment ----------------------------------------------------

def _centered(rng):
    return center_on_hips(random_clip(rng), coco17())


def test_align_diagonal_trunk():
    topo = coco17()
    frames = np.zeros((1, 17, 2))
    # both shoulders at (1, 1): neck is (1, 1), hips stay at the origin
    frames[0, topo.shoulder_left] = [1.0, 1.0]
    frames[0, topo.shoulder_right] = [1.0, 1.0]
    frames[0, topo.hip_left] = [-1.0, 0.0]
    frames[0, topo.hip_right] = [1.0, 0.0]
    out = align_trunk(_clip(frames), topo)
    neck = topo.neck(out.frames)[0]
    assert abs(neck[0]) < 1e-12
    assert neck[1] == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_align_identity_when_vertical(rng):
    topo = coco17()
    seq = align_trunk(_centered(rng), topo)
    again = align_trunk(seq, topo)
    assert np.allclose(seq.frames, again.frames, atol=1e-9)


def test_align_is_isometry(rng):
    topo = coco17()
    seq = _centered(rng)
    out = align_trunk(seq, topo)
    for m in range(0, seq.n_frames, 7):
        before = np.linalg.norm(seq.frames[m, :, None, :] - seq.frames[m, None, :, :], axis=-1)
        after = np.linalg.norm(out.frames[m, :, None, :] - out.frames[m, None, :, :], axis=-1)
        assert np.abs(before - after).max() < 1e-9


def test_align_degenerate_trunk_names_frame():
    topo = coco17()
    frames = np.zeros((3, 17, 2))
    frames[:, topo.hip_left] = [-1.0, 0.0]
    frames[:, topo.hip_right] = [1.0, 0.0]
    frames[[0, 2], topo.shoulder_left] = [0.5, 2.0]
    frames[[0, 2], topo.shoulder_right] = [-0.5, 2.0]
    # frame 1 keeps shoulders at the origin -> zero trunk
    with pytest.raises(ValueError, match="frame 1"):
        align_trunk(_clip(frames), topo)


# --- height normalization ----------------------------------------------

def _height_oracle(frames, topo):
    """Independent re-derivation with explicit loops."""
    def seg(a, b, m):
        return float(np.hypot(*(frames[m, a] - frames[m, b])))

    heights = []
    for m in range(frames.shape[0]):
        lower = 0.5 * (seg(topo.knee_left, topo.ankle_left, m) + seg(topo.knee_right, topo.ankle_right, m))
        upper = 0.5 * (seg(topo.hip_left, topo.knee_left, m) + seg(topo.hip_right, topo.knee_right, m))
        hip = 0.5 * (frames[m, topo.hip_left] + frames[m, topo.hip_right])
        neck = 0.5 * (frames[m, topo.shoulder_left] + frames[m, topo.shoulder_right])
        trunk = float(np.hypot(*(neck - hip)))
        head = float(np.hypot(*(frames[m, topo.nose] - neck)))
        heights.append(lower + upper + trunk + head)
    return sum(heights) / len(heights)


def test_normalize_scales_by_segment_sum():
    topo = coco17()
    frames = np.zeros((4, 17, 2))
    frames[:, topo.hip_left] = [-0.5, 0.0]
    frames[:, topo.hip_right] = [0.5, 0.0]
    frames[:, topo.shoulder_left] = [-0.5, -0.8]
    frames[:, topo.shoulder_right] = [0.5, -0.8]   # trunk 0.8
    frames[:, topo.nose] = [0.0, -1.2]             # head 0.4
    frames[:, topo.knee_left] = [-0.5, 0.5]        # upper 0.5
    frames[:, topo.knee_right] = [0.5, 0.5]
    frames[:, topo.ankle_left] = [-0.5, 0.8]       # lower 0.3
    frames[:, topo.ankle_right] = [0.5, 0.8]
    # height = 0.3 + 0.5 + 0.8 + 0.4 = 2.0
    out = normalize_height(_clip(frames), topo)
    assert np.allclose(out.frames, frames / 2.0)


def test_normalize_identity_at_height_one(rng):
    topo = coco17()
    seq = random_clip(rng)
    once = normalize_height(seq, topo)
    twice = normalize_height(once, topo)
    assert np.allclose(once.frames, twice.frames, atol=1e-9)


def test_normalize_height_matches_oracle(rng):
    topo = coco17()
    for _ in range(10):
        seq = random_clip(rng)
        out = normalize_height(seq, topo)
        assert _height_oracle(out.frames, topo) == pytest.approx(1.0, abs=1e-6)
        assert body_height(out.frames, topo) == pytest.approx(1.0, abs=1e-6)


# --- facial landmark removal -------------------------------------------

def test_drop_facial_reduces_joint_count(rng):
    topo = coco17()
    seq = random_clip(rng)
    out, topo13 = drop_facial_landmarks(seq, topo)
    assert topo13.joint_count == 13
    assert out.frames.shape[1] == 13
    assert topo13.facial_indices == frozenset()


def test_drop_facial_preserves_survivor_coordinates(rng):
    topo = coco17()
    seq = random_clip(rng)
    out, topo13 = drop_facial_landmarks(seq, topo)
    keep = [i for i in range(17) if i not in topo.facial_indices]
    assert np.array_equal(out.frames, seq.frames[:, keep, :])


def test_drop_facial_edges_map_to_originals(rng):
    topo = coco17()
    _, topo13 = drop_facial_landmarks(random_clip(rng), topo)
    keep = [i for i in range(17) if i not in topo.facial_indices]
    original = {tuple(sorted(e)) for e in topo.edges}
    for a, b in topo13.edges:
        assert tuple(sorted((keep[a], keep[b]))) in original


# --- full pipeline ------------------------------------------------------

def test_pipeline_postconditions(rng):
    topo = coco17()
    for _ in range(5):
        seq = random_clip(rng, m=30)
        out, topo13 = preprocess_pipeline(seq, topo)
        assert topo13.joint_count == 13
        assert np.abs(topo13.hip_center(out.frames)).max() < 1e-9
        trunk = topo13.neck(out.frames) - topo13.hip_center(out.frames)
        assert np.abs(trunk[:, 0]).max() < 1e-9
        assert _height_oracle(out.frames, topo13) == pytest.approx(1.0, abs=1e-6)


def test_pipeline_all_disabled_is_identity(rng):
    topo = coco17()
    seq = random_clip(rng)
    cfg = PreprocessConfig(median_window_s=0.0, center=False, align_trunk=False,
                           height_norm="off", drop_facial=False)
    out, topo_out = preprocess_pipeline(seq, topo, cfg)
    assert np.array_equal(out.frames, seq.frames)
    assert topo_out == topo


def test_pipeline_trunk_norm_variant(rng):
    topo = coco17()
    seq = random_clip(rng)
    out = normalize_height(seq, topo, mode="trunk")
    expected = seq.frames / trunk_length(seq.frames, topo)
    assert np.allclose(out.frames, expected)
    assert trunk_length(out.frames, topo) == pytest.approx(1.0, abs=1e-9)


def test_pipeline_order_scale_equivalence(rng):
    # height-then-align equals align-then-height up to a global scale; with
    # rotation-invariant segment lengths the scale works out to exactly 1
    topo = coco17()
    seq = center_on_hips(median_smooth(random_clip(rng), 0.5), topo)
    a = normalize_height(align_trunk(seq, topo), topo)
    b = align_trunk(normalize_height(seq, topo), topo)
    scale = np.linalg.norm(a.frames) / np.linalg.norm(b.frames)
    assert np.allclose(a.frames, b.frames * scale, atol=1e-9)


def test_pipeline_produces_finite_output(rng):
    topo = coco17()
    for _ in range(10):
        out, _ = preprocess_pipeline(random_clip(rng, m=25), topo)
        assert np.isfinite(out.frames).all()
