"""Training-time stochastic augmentation with an explicit random stream.

Every transform is a deterministic function of (input, rng state, config);
none of them changes the frame count, joint count or channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline

from .data import PoseSequence

CURVE_FLOOR = 0.05  # warp curves are clamped here to avoid sign flips

TRANSFORM_ORDER = ("mirror", "time_reverse", "noise", "scale", "magnitude_warp", "time_warp")


@dataclass
class AugmentConfig:
    apply_probability: float = 0.8
    mirror: float = 0.5
    time_reverse: float = 0.5
    noise: float = 1.0
    scale: float = 1.0
    magnitude_warp: float = 0.5
    time_warp: float = 0.5
    noise_std_fraction: float = 1.0 / 3.0
    noise_scope: str = "joint"  # joint | channel (see add_noise)
    scale_range: tuple[float, float] = (0.35, 1.65)
    warp_knots: int = 4
    warp_std: float = 0.2

    def __post_init__(self):
        probs = {"apply_probability": self.apply_probability}
        probs.update({name: getattr(self, name) for name in TRANSFORM_ORDER})
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        lo, hi = self.scale_range
        if not lo < hi:
            raise ValueError(f"scale_range low must be < high, got {self.scale_range}")
        if self.noise_scope not in ("joint", "channel"):
            raise ValueError(f"noise_scope must be joint|channel, got {self.noise_scope!r}")
        if self.warp_knots < 2:
            raise ValueError("warp_knots must be >= 2")
        if self.noise_std_fraction < 0 or self.warp_std < 0:
            raise ValueError("noise_std_fraction and warp_std must be >= 0")


def mirror(seq: PoseSequence) -> PoseSequence:
    """Flip left/right by negating x; valid once the clip is hip-centered."""
    out = seq.frames.copy()
    out[..., 0] = -out[..., 0]
    return seq.with_frames(out, seq.confidence)


def time_reverse(seq: PoseSequence) -> PoseSequence:
    conf = None if seq.confidence is None else seq.confidence[::-1].copy()
    return seq.with_frames(seq.frames[::-1].copy(), conf)


def add_noise(
    seq: PoseSequence,
    rng: np.random.Generator,
    std_fraction: float = 1.0 / 3.0,
    scope: str = "joint",
) -> PoseSequence:
    """Gaussian jitter scaled to each coordinate channel's own variability.

    With scope="joint" every (joint, channel) trajectory counts as one series
    and receives noise at std_fraction of its std over time, which emulates
    pose-estimation jitter proportional to how much that keypoint moves.
    scope="channel" pools the std over all joints of an x/y channel instead;
    that folds the static skeleton extent into the noise scale and is kept
    only as a config escape hatch.
    """
    if scope == "joint":
        std = seq.frames.std(axis=0) * std_fraction  # (J, C)
    elif scope == "channel":
        std = seq.frames.std(axis=(0, 1)) * std_fraction  # (C,)
    else:
        raise ValueError(f"noise scope must be joint|channel, got {scope!r}")
    noise = rng.standard_normal(seq.frames.shape) * std
    return seq.with_frames(seq.frames + noise, seq.confidence)


def scale_magnitude(
    seq: PoseSequence, rng: np.random.Generator, scale_range: tuple[float, float] = (0.35, 1.65)
) -> PoseSequence:
    factor = rng.uniform(scale_range[0], scale_range[1])
    return seq.with_frames(seq.frames * factor, seq.confidence)


def smooth_curve(
    rng: np.random.Generator, n_points: int, knots: int, std: float, floor: float = CURVE_FLOOR
) -> np.ndarray:
    """Spline through `knots` values ~ N(1, std^2) spaced over [0, n_points-1]."""
    values = 1.0 + rng.standard_normal(knots) * std
    positions = np.linspace(0.0, n_points - 1.0, knots)
    spline = make_interp_spline(positions, values, k=min(3, knots - 1))
    return np.maximum(spline(np.arange(n_points, dtype=np.float64)), floor)


def magnitude_warp(
    seq: PoseSequence, rng: np.random.Generator, knots: int = 4, std: float = 0.2
) -> PoseSequence:
    """Scale each frame by a smooth random curve that varies around 1."""
    if seq.n_frames < 2:
        raise ValueError("magnitude_warp needs at least 2 frames")
    curve = smooth_curve(rng, seq.n_frames, knots, std)
    return seq.with_frames(seq.frames * curve[:, None, None], seq.confidence)


def time_warp(
    seq: PoseSequence, rng: np.random.Generator, knots: int = 4, std: float = 0.2
) -> PoseSequence:
    """Resample frames at smoothly distorted time stamps spanning the original duration."""
    m = seq.n_frames
    if m < 2:
        raise ValueError("time_warp needs at least 2 frames")
    rate = smooth_curve(rng, m, knots, std)  # strictly positive
    cum = np.cumsum(rate)
    stamps = (cum - cum[0]) / (cum[-1] - cum[0]) * (m - 1)
    lo = np.clip(np.floor(stamps).astype(np.int64), 0, m - 2)
    frac = (stamps - lo)[:, None, None]
    out = seq.frames[lo] * (1.0 - frac) + seq.frames[lo + 1] * frac
    # resampled time stamps invalidate any per-frame confidence
    return seq.with_frames(out, None)


def augment(
    seq: PoseSequence,
    rng: np.random.Generator,
    config: AugmentConfig | None = None,
    trace: list[str] | None = None,
) -> PoseSequence:
    """Apply the transform suite with the configured probabilities, in fixed order."""
    cfg = config or AugmentConfig()
    if rng.uniform() >= cfg.apply_probability:
        return seq
    out = seq
    for name in TRANSFORM_ORDER:
        if rng.uniform() >= getattr(cfg, name):
            continue
        if name == "mirror":
            out = mirror(out)
        elif name == "time_reverse":
            out = time_reverse(out)
        elif name == "noise":
            out = add_noise(out, rng, cfg.noise_std_fraction, cfg.noise_scope)
        elif name == "scale":
            out = scale_magnitude(out, rng, cfg.scale_range)
        elif name == "magnitude_warp":
            out = magnitude_warp(out, rng, cfg.warp_knots, cfg.warp_std)
        elif name == "time_warp":
            out = time_warp(out, rng, cfg.warp_knots, cfg.warp_std)
        if trace is not None:
            trace.append(name)
    return out
