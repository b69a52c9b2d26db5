"""Pose-sequence cleanup before encoding.

Stages, in pipeline order: running-median smoothing, hip centring, trunk
alignment to the vertical axis, body-height scale normalization, and facial
keypoint removal. Every stage is a pure function and can be toggled off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import PoseSequence
from .topology import SkeletonTopology

TRUNK_EPS = 1e-8


@dataclass
class PreprocessConfig:
    median_window_s: float = 0.5
    center: bool = True
    align_trunk: bool = True
    height_norm: str = "segments"  # segments | trunk | off
    drop_facial: bool = True

    def __post_init__(self):
        if self.height_norm not in ("segments", "trunk", "off"):
            raise ValueError(f"height_norm must be segments|trunk|off, got {self.height_norm!r}")
        if self.median_window_s < 0:
            raise ValueError("median_window_s must be >= 0")


def median_window_frames(window_seconds: float, fps: float) -> int:
    """Window length in frames, forced odd (even products round up)."""
    w = int(round(window_seconds * fps))
    if w % 2 == 0:
        w += 1
    return max(w, 1)


def median_smooth(seq: PoseSequence, window_seconds: float = 0.5) -> PoseSequence:
    """Running median over time, per joint and channel, with reflect padding."""
    w = median_window_frames(window_seconds, seq.fps)
    if w <= 1:
        return seq.with_frames(seq.frames.copy(), seq.confidence)
    m = seq.n_frames
    if m < w:
        raise ValueError(
            f"clip {seq.clip_id}: {m} frames is shorter than the smoothing window of {w}"
        )
    k = w // 2
    padded = np.pad(seq.frames, ((k, k), (0, 0), (0, 0)), mode="reflect")
    windows = sliding_window_view(padded, w, axis=0)  # (M, J, C, w)
    return seq.with_frames(np.median(windows, axis=-1), seq.confidence)


def center_on_hips(seq: PoseSequence, topology: SkeletonTopology) -> PoseSequence:
    """Shift every frame so the hip midpoint lands exactly on the origin."""
    hc = topology.hip_center(seq.frames)  # (M, C)
    if not np.isfinite(hc).all():
        raise ValueError(f"clip {seq.clip_id}: non-finite hip coordinates")
    return seq.with_frames(seq.frames - hc[:, None, :], seq.confidence)


def align_trunk(seq: PoseSequence, topology: SkeletonTopology, eps: float = TRUNK_EPS) -> PoseSequence:
    """Rotate each frame about the origin so the hip-to-neck vector points up (+y)."""
    trunk = topology.neck(seq.frames) - topology.hip_center(seq.frames)  # (M, C)
    norm = np.hypot(trunk[:, 0], trunk[:, 1])
    if (norm <= eps).any():
        frame = int(np.argmax(norm <= eps))
        raise ValueError(f"clip {seq.clip_id}: degenerate trunk vector at frame {frame}")
    c = trunk[:, 1] / norm  # rotation sending (tx, ty) to (0, +norm)
    s = trunk[:, 0] / norm
    x, y = seq.frames[..., 0], seq.frames[..., 1]
    out = np.stack([c[:, None] * x - s[:, None] * y, s[:, None] * x + c[:, None] * y], axis=-1)
    return seq.with_frames(out, seq.confidence)


def _segment_mean(frames: np.ndarray, a: int, b: int) -> np.ndarray:
    return np.linalg.norm(frames[:, a, :] - frames[:, b, :], axis=-1)


def body_height(frames: np.ndarray, topology: SkeletonTopology) -> float:
    """Mean over frames of lower leg + upper leg (left/right averaged) + trunk + neck-to-nose."""
    t = topology
    lower = 0.5 * (_segment_mean(frames, t.knee_left, t.ankle_left)
                   + _segment_mean(frames, t.knee_right, t.ankle_right))
    upper = 0.5 * (_segment_mean(frames, t.hip_left, t.knee_left)
                   + _segment_mean(frames, t.hip_right, t.knee_right))
    trunk = np.linalg.norm(t.neck(frames) - t.hip_center(frames), axis=-1)
    head = np.linalg.norm(frames[:, t.nose, :] - t.neck(frames), axis=-1)
    return float(np.mean(lower + upper + trunk + head))


def trunk_length(frames: np.ndarray, topology: SkeletonTopology) -> float:
    return float(np.mean(np.linalg.norm(topology.neck(frames) - topology.hip_center(frames), axis=-1)))


def normalize_height(
    seq: PoseSequence,
    topology: SkeletonTopology,
    mode: str = "segments",
    eps: float = 1e-8,
) -> PoseSequence:
    """Divide all coordinates by one per-clip scale so the body height is 1."""
    if mode == "segments":
        height = body_height(seq.frames, topology)
    elif mode == "trunk":
        height = trunk_length(seq.frames, topology)
    else:
        raise ValueError(f"unknown height normalization mode {mode!r}")
    if not np.isfinite(height) or height <= eps:
        raise ValueError(f"clip {seq.clip_id}: computed height {height} is not usable")
    return seq.with_frames(seq.frames / height, seq.confidence)


def drop_facial_landmarks(
    seq: PoseSequence, topology: SkeletonTopology
) -> tuple[PoseSequence, SkeletonTopology]:
    """Remove the facial keypoints from frames and topology, re-indexing both."""
    if not topology.facial_indices:
        return seq, topology
    new_topo, keep = topology.without_joints(set(topology.facial_indices))
    frames = seq.frames[:, keep, :]
    conf = None if seq.confidence is None else seq.confidence[:, keep]
    return seq.with_frames(frames, conf), new_topo


def preprocess_pipeline(
    seq: PoseSequence,
    topology: SkeletonTopology,
    config: PreprocessConfig | None = None,
) -> tuple[PoseSequence, SkeletonTopology]:
    """Run the enabled stages in their fixed order."""
    cfg = config or PreprocessConfig()
    out = seq
    if cfg.median_window_s > 0:
        out = median_smooth(out, cfg.median_window_s)
    if cfg.center:
        out = center_on_hips(out, topology)
    if cfg.align_trunk:
        out = align_trunk(out, topology)
    if cfg.height_norm != "off":
        out = normalize_height(out, topology, mode=cfg.height_norm)
    topo = topology
    if cfg.drop_facial:
        out, topo = drop_facial_landmarks(out, topology)
    return out, topo


def preprocess_dataset(
    sequences: list[PoseSequence],
    topology: SkeletonTopology,
    config: PreprocessConfig | None = None,
) -> tuple[list[PoseSequence], SkeletonTopology]:
    """Preprocess every clip; all clips share the resulting topology."""
    cfg = config or PreprocessConfig()
    out: list[PoseSequence] = []
    final_topo = topology
    for seq in sequences:
        processed, final_topo = preprocess_pipeline(seq, topology, cfg)
        out.append(processed)
    return out, final_topo
