"""Pose-sequence records and the on-disk dataset format.

A dataset directory holds `manifest.json` (an array of clip entries, in
load order), `topology.json`, and one JSON record file per clip with the
raw M x J x C coordinate array. Floats are written with Python's repr so a
round trip through disk is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .topology import SkeletonTopology


class SchemaError(ValueError):
    """A dataset file is present but violates the expected schema."""


@dataclass
class PoseSequence:
    clip_id: str
    subject_id: str
    fps: float
    frames: np.ndarray  # (M, J, C) float64
    label: int
    confidence: np.ndarray | None = None  # (M, J) in [0, 1]

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    def with_frames(self, frames: np.ndarray, confidence: np.ndarray | None = None) -> "PoseSequence":
        return replace(self, frames=frames, confidence=confidence)

    def validate(self, topology: SkeletonTopology) -> None:
        f = self.frames
        if f.ndim != 3:
            raise SchemaError(f"clip {self.clip_id}: frames must be M x J x C, got shape {f.shape}")
        m, j, c = f.shape
        if m < 1:
            raise SchemaError(f"clip {self.clip_id}: empty frame array")
        if j != topology.joint_count:
            raise SchemaError(
                f"clip {self.clip_id}: inconsistent joint count {j}, topology has {topology.joint_count}"
            )
        if c != topology.channel_count:
            raise SchemaError(f"clip {self.clip_id}: channel count {c} != {topology.channel_count}")
        if not np.isfinite(f).all():
            t, joint, ch = np.argwhere(~np.isfinite(f))[0]
            raise SchemaError(
                f"clip {self.clip_id}: non-finite coordinate in field frames[{t}][{joint}][{ch}]"
            )
        if self.label not in (0, 1):
            raise SchemaError(f"clip {self.clip_id}: field label must be 0 or 1, got {self.label!r}")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise SchemaError(f"clip {self.clip_id}: field fps must be positive, got {self.fps!r}")
        if self.confidence is not None:
            if self.confidence.shape != (m, j):
                raise SchemaError(
                    f"clip {self.clip_id}: field confidence has shape {self.confidence.shape}, "
                    f"expected {(m, j)}"
                )
            if not np.isfinite(self.confidence).all():
                raise SchemaError(f"clip {self.clip_id}: non-finite value in field confidence")
            if self.confidence.min() < 0 or self.confidence.max() > 1:
                raise SchemaError(f"clip {self.clip_id}: field confidence outside [0, 1]")


def _clip_record(seq: PoseSequence) -> dict:
    return {
        "clip_id": seq.clip_id,
        "subject_id": seq.subject_id,
        "fps": seq.fps,
        "label": seq.label,
        "frames": seq.frames.tolist(),
        "confidence": None if seq.confidence is None else seq.confidence.tolist(),
    }


def _clip_from_record(d: dict, clip_id: str) -> PoseSequence:
    try:
        frames = np.asarray(d["frames"], dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"clip {clip_id}: unreadable field frames ({exc})") from exc
    conf = d.get("confidence")
    confidence = None if conf is None else np.asarray(conf, dtype=np.float64)
    return PoseSequence(
        clip_id=str(d.get("clip_id", clip_id)),
        subject_id=str(d.get("subject_id", "")),
        fps=float(d.get("fps", 0.0)),
        frames=frames,
        label=int(d.get("label", -1)) if d.get("label") is not None else -1,
        confidence=confidence,
    )


def load_clip(path: str | Path) -> PoseSequence:
    """Load a single standalone clip record file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"clip file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        d = json.load(fh)
    return _clip_from_record(d, path.stem)


def load_dataset(path: str | Path) -> tuple[list[PoseSequence], SkeletonTopology]:
    """Load and validate a dataset directory; records come back in manifest order."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    topo_path = root / "topology.json"
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    if not topo_path.exists():
        raise FileNotFoundError(f"topology not found: {topo_path}")

    with topo_path.open("r", encoding="utf-8") as fh:
        topology = SkeletonTopology.from_dict(json.load(fh))
    with manifest_path.open("r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if not isinstance(manifest, list):
        raise SchemaError("manifest.json must be an array of clip entries")

    sequences: list[PoseSequence] = []
    seen: set[str] = set()
    for i, entry in enumerate(manifest):
        for field in ("clip_id", "subject_id", "fps", "label", "file"):
            if field not in entry:
                raise SchemaError(f"manifest entry {i}: missing field {field}")
        clip_id = str(entry["clip_id"])
        if clip_id in seen:
            raise SchemaError(f"clip {clip_id}: duplicate clip_id in manifest")
        seen.add(clip_id)
        record_path = root / entry["file"]
        if not record_path.exists():
            raise FileNotFoundError(f"record file for clip {clip_id} not found: {record_path}")
        with record_path.open("r", encoding="utf-8") as fh:
            seq = _clip_from_record(json.load(fh), clip_id)
        seq = replace(
            seq,
            clip_id=clip_id,
            subject_id=str(entry["subject_id"]),
            fps=float(entry["fps"]),
            label=int(entry["label"]),
        )
        seq.validate(topology)
        sequences.append(seq)
    return sequences, topology


def save_dataset(path: str | Path, sequences: list[PoseSequence], topology: SkeletonTopology) -> None:
    root = Path(path)
    clips_dir = root / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for seq in sequences:
        rel = f"clips/{seq.clip_id}.json"
        with (root / rel).open("w", encoding="utf-8") as fh:
            json.dump(_clip_record(seq), fh)
        manifest.append({
            "clip_id": seq.clip_id,
            "subject_id": seq.subject_id,
            "fps": seq.fps,
            "label": seq.label,
            "file": rel,
        })
    with (root / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    with (root / "topology.json").open("w", encoding="utf-8") as fh:
        json.dump(topology.to_dict(), fh, indent=2)
