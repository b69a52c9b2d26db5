"""Seedable synthetic 2D infant pose sequences with two movement classes.

Limbs are driven by per-joint angle signals built from sinusoid mixtures and
rendered with forward kinematics, so segment lengths stay consistent. The
"normal" class mixes several frequencies with a strongly modulated amplitude;
the "poor repertoire" class is a single slow component with almost none,
which makes the two classes separable by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .data import PoseSequence
from .topology import SkeletonTopology, coco17


@dataclass
class ClassMotionParams:
    sinusoid_count: tuple[int, int] = (3, 5)
    freq_range: tuple[float, float] = (0.9, 2.2)
    amplitude_range: tuple[float, float] = (0.10, 0.22)
    amplitude_jitter: float = 0.5
    # one frequency drawn per clip and shared by every joint signal: the
    # monotonous whole-body pattern, robust to any global augmentation
    shared_frequency: bool = False


@dataclass
class SynthConfig:
    subjects_per_class: int = 50
    clips_per_subject: int = 5
    frames_per_clip: int = 300
    fps: float = 10.0
    # the classes are told apart by movement complexity, frequency band and
    # inter-limb coordination, all of which survive the global scale/warp
    # augmentations; per-component amplitudes are shared, so magnitude alone
    # only separates through the component count
    normal: ClassMotionParams = field(default_factory=lambda: ClassMotionParams(
        sinusoid_count=(3, 5), freq_range=(1.0, 2.3),
        amplitude_range=(0.10, 0.22), amplitude_jitter=0.6,
        shared_frequency=False))
    poor_repertoire: ClassMotionParams = field(default_factory=lambda: ClassMotionParams(
        sinusoid_count=(1, 1), freq_range=(0.15, 0.50),
        amplitude_range=(0.10, 0.22), amplitude_jitter=0.03,
        shared_frequency=True))
    noise_std: float = 0.5  # pixels of observation jitter on every coordinate
    base_scale: float = 180.0  # pixels per body unit
    seed: int = 0

    def __post_init__(self):
        nyquist = self.fps / 2.0
        for name, params in (("normal", self.normal), ("poor_repertoire", self.poor_repertoire)):
            if params.freq_range[1] >= nyquist:
                raise ValueError(
                    f"{name} frequency range {params.freq_range} reaches the Nyquist limit {nyquist}"
                )
            if params.amplitude_range[0] <= 0:
                raise ValueError(f"{name} amplitudes must be positive")
        if self.subjects_per_class < 1 or self.clips_per_subject < 1 or self.frames_per_clip < 2:
            raise ValueError("subjects_per_class, clips_per_subject >= 1 and frames_per_clip >= 2")


# Static template in body units; hips at the origin, head toward -y.
_TEMPLATE = {
    "nose": (0.00, -1.02),
    "eye_left": (-0.08, -1.10), "eye_right": (0.08, -1.10),
    "ear_left": (-0.16, -1.05), "ear_right": (0.16, -1.05),
    "shoulder_left": (-0.26, -0.80), "shoulder_right": (0.26, -0.80),
    "hip_left": (-0.20, 0.00), "hip_right": (0.20, 0.00),
}
_SEGMENTS = {"upper_arm": 0.28, "forearm": 0.26, "thigh": 0.30, "shank": 0.28}
# 17-joint index order matching coco17(): nose, eyes, ears, shoulders, elbows,
# wrists, hips, knees, ankles.
_BASE_ANGLES = {
    "upper_arm_left": math.pi - 0.4, "elbow_bend_left": -0.5,
    "upper_arm_right": 0.4, "elbow_bend_right": 0.5,
    "thigh_left": math.pi / 2 + 0.25, "knee_bend_left": -0.3,
    "thigh_right": math.pi / 2 - 0.25, "knee_bend_right": 0.3,
}


def _smooth_noise(rng: np.random.Generator, n: int, knots: int) -> np.ndarray:
    """Zero-mean smooth curve through N(0,1) knots spread over the clip."""
    knots = max(knots, 2)
    values = rng.standard_normal(knots)
    positions = np.linspace(0.0, n - 1.0, knots)
    return make_interp_spline(positions, values, k=min(3, knots - 1))(np.arange(n, dtype=np.float64))


def _angle_signal(
    rng: np.random.Generator,
    t: np.ndarray,
    params: ClassMotionParams,
    shared: tuple[float, float] | None = None,
) -> np.ndarray:
    """Sum of amplitude-modulated sinusoids; the class parameters set its texture.

    When `shared` carries a clip-wide (frequency, phase), every signal locks
    to it: the whole body moves in one monotonous rhythm.
    """
    k = int(rng.integers(params.sinusoid_count[0], params.sinusoid_count[1] + 1))
    knots = max(2, int(round((t[-1] - t[0]) / 2.0)))
    signal = np.zeros_like(t)
    for _ in range(k):
        if shared is not None:
            freq, phase = shared
        else:
            freq = rng.uniform(*params.freq_range)
            phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(*params.amplitude_range)
        envelope = 1.0 + params.amplitude_jitter * _smooth_noise(rng, t.size, knots)
        signal += amp * envelope * np.sin(2.0 * math.pi * freq * t + phase)
    return signal


def _unit(theta: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _rotate(points: np.ndarray, angle: np.ndarray | float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    x, y = points[..., 0], points[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def _clip_frames(rng: np.random.Generator, config: SynthConfig,
                 params: ClassMotionParams, subject: dict) -> np.ndarray:
    m = config.frames_per_clip
    t = np.arange(m, dtype=np.float64) / config.fps
    knots = max(2, int(round(t[-1] / 2.0)))

    frames = np.zeros((m, 17, 2), dtype=np.float64)
    # torso sway, shared by both classes: shoulders and head rock about the hips
    sway = 0.04 * _smooth_noise(rng, m, knots)

    static = {name: np.asarray(xy, dtype=np.float64) for name, xy in _TEMPLATE.items()}
    for name in ("shoulder_left", "shoulder_right", "nose",
                 "eye_left", "eye_right", "ear_left", "ear_right"):
        static[name] = static[name] + subject["pose_jitter"][name]
    head_bob = 0.03 * _smooth_noise(rng, m, knots)

    def torso(name: str, extra: np.ndarray | float = 0.0) -> np.ndarray:
        return _rotate(np.broadcast_to(static[name], (m, 2)), sway + extra)

    frames[:, 0] = torso("nose", head_bob)
    frames[:, 1] = torso("eye_left", head_bob)
    frames[:, 2] = torso("eye_right", head_bob)
    frames[:, 3] = torso("ear_left", head_bob)
    frames[:, 4] = torso("ear_right", head_bob)
    frames[:, 5] = torso("shoulder_left")
    frames[:, 6] = torso("shoulder_right")
    frames[:, 11] = np.broadcast_to(static["hip_left"], (m, 2))
    frames[:, 12] = np.broadcast_to(static["hip_right"], (m, 2))

    shared = None
    if params.shared_frequency:
        shared = (rng.uniform(*params.freq_range), rng.uniform(0.0, 2.0 * math.pi))

    def limb(root: np.ndarray, base_main: float, base_bend: float,
             seg_a: float, seg_b: float) -> tuple[np.ndarray, np.ndarray]:
        theta = base_main + _angle_signal(rng, t, params, shared)
        bend = base_bend + _angle_signal(rng, t, params, shared)
        mid = root + seg_a * _unit(theta)
        end = mid + seg_b * _unit(theta + bend)
        return mid, end

    b = {k: v + subject["angle_jitter"][k] for k, v in _BASE_ANGLES.items()}
    frames[:, 7], frames[:, 9] = limb(frames[:, 5], b["upper_arm_left"], b["elbow_bend_left"],
                                      _SEGMENTS["upper_arm"], _SEGMENTS["forearm"])
    frames[:, 8], frames[:, 10] = limb(frames[:, 6], b["upper_arm_right"], b["elbow_bend_right"],
                                       _SEGMENTS["upper_arm"], _SEGMENTS["forearm"])
    frames[:, 13], frames[:, 15] = limb(frames[:, 11], b["thigh_left"], b["knee_bend_left"],
                                        _SEGMENTS["thigh"], _SEGMENTS["shank"])
    frames[:, 14], frames[:, 16] = limb(frames[:, 12], b["thigh_right"], b["knee_bend_right"],
                                        _SEGMENTS["thigh"], _SEGMENTS["shank"])

    # camera placement: per-clip orientation, slow drift, pixel scale and offset
    orientation = rng.uniform(-math.pi, math.pi) + 0.02 * _smooth_noise(rng, m, knots)
    frames = _rotate(frames, orientation[:, None])
    drift = np.stack([0.02 * _smooth_noise(rng, m, knots),
                      0.02 * _smooth_noise(rng, m, knots)], axis=-1)
    frames = (frames + drift[:, None, :]) * subject["scale"]
    frames += np.asarray([640.0, 360.0])
    frames += rng.normal(0.0, config.noise_std, frames.shape)
    return frames


def _subject_profile(rng: np.random.Generator, config: SynthConfig) -> dict:
    return {
        "scale": config.base_scale * rng.uniform(0.85, 1.15),
        "pose_jitter": {
            name: rng.normal(0.0, 0.01, 2)
            for name in ("shoulder_left", "shoulder_right", "nose",
                         "eye_left", "eye_right", "ear_left", "ear_right")
        },
        "angle_jitter": {k: rng.normal(0.0, 0.05) for k in _BASE_ANGLES},
    }


def generate(config: SynthConfig | None = None) -> tuple[list[PoseSequence], SkeletonTopology]:
    """Build the labeled dataset; poor repertoire is the positive class (label 1)."""
    cfg = config or SynthConfig()
    topology = coco17()
    total_subjects = 2 * cfg.subjects_per_class
    root = np.random.SeedSequence(cfg.seed)
    subject_seeds = root.spawn(total_subjects)

    sequences: list[PoseSequence] = []
    for s_idx in range(total_subjects):
        label = 1 if s_idx >= cfg.subjects_per_class else 0
        params = cfg.poor_repertoire if label == 1 else cfg.normal
        subject_id = f"s{s_idx:03d}"
        subject_rng = np.random.default_rng(subject_seeds[s_idx])
        profile = _subject_profile(subject_rng, cfg)
        clip_seeds = subject_seeds[s_idx].spawn(cfg.clips_per_subject)
        for c_idx in range(cfg.clips_per_subject):
            rng = np.random.default_rng(clip_seeds[c_idx])
            frames = _clip_frames(rng, cfg, params, profile)
            sequences.append(PoseSequence(
                clip_id=f"{subject_id}_c{c_idx:02d}",
                subject_id=subject_id,
                fps=cfg.fps,
                frames=frames,
                label=label,
                confidence=rng.uniform(0.6, 1.0, frames.shape[:2]),
            ))
    for seq in sequences:
        seq.validate(topology)
    return sequences, topology
