"""Skeleton graph description: joints, edges and the landmarks preprocessing needs.

The hip centre and the neck are not stored keypoints; pose estimators emit
hips and shoulders, and both landmarks are derived as midpoints per frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

Edge = tuple[int, int]

# Standard 17-keypoint layout: 0 nose, 1-2 eyes, 3-4 ears, 5-6 shoulders,
# 7-8 elbows, 9-10 wrists, 11-12 hips, 13-14 knees, 15-16 ankles.
COCO17_EDGES: tuple[Edge, ...] = (
    (0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 5), (4, 6),
    (5, 6), (5, 7), (7, 9), (6, 8), (8, 10),
    (5, 11), (6, 12), (11, 12),
    (11, 13), (13, 15), (12, 14), (14, 16),
)


@dataclass(frozen=True)
class SkeletonTopology:
    joint_count: int
    edges: tuple[Edge, ...]
    nose: int
    shoulder_left: int
    shoulder_right: int
    hip_left: int
    hip_right: int
    knee_left: int
    knee_right: int
    ankle_left: int
    ankle_right: int
    facial_indices: frozenset[int] = frozenset()
    channel_count: int = 2

    def __post_init__(self):
        j = self.joint_count
        if j < 2:
            raise ValueError(f"joint_count must be >= 2, got {j}")
        if self.channel_count != 2:
            raise ValueError("only 2D skeletons are supported")
        for a, b in self.edges:
            if not (0 <= a < j and 0 <= b < j):
                raise ValueError(f"edge ({a}, {b}) references a joint outside [0, {j})")
            if a == b:
                raise ValueError(f"self-loop edge ({a}, {b}) is not allowed")
        for name, idx in self.landmarks().items():
            if not 0 <= idx < j:
                raise ValueError(f"landmark {name}={idx} outside [0, {j})")
        if self.hip_left == self.hip_right:
            raise ValueError("hip_left and hip_right must differ")
        bad = self.facial_indices & set(self.landmarks().values())
        if bad:
            raise ValueError(f"facial_indices {sorted(bad)} overlap named landmarks")
        if any(not 0 <= f < j for f in self.facial_indices):
            raise ValueError("facial_indices outside joint range")

    def landmarks(self) -> dict[str, int]:
        return {
            "nose": self.nose,
            "shoulder_left": self.shoulder_left,
            "shoulder_right": self.shoulder_right,
            "hip_left": self.hip_left,
            "hip_right": self.hip_right,
            "knee_left": self.knee_left,
            "knee_right": self.knee_right,
            "ankle_left": self.ankle_left,
            "ankle_right": self.ankle_right,
        }

    def adjacency(self) -> np.ndarray:
        """Binary symmetric adjacency with a zero diagonal."""
        a = np.zeros((self.joint_count, self.joint_count), dtype=np.float64)
        for i, k in self.edges:
            a[i, k] = 1.0
            a[k, i] = 1.0
        return a

    def hip_center(self, frames: np.ndarray) -> np.ndarray:
        """Midpoint of the two hips, per frame. frames: (..., J, C)."""
        return 0.5 * (frames[..., self.hip_left, :] + frames[..., self.hip_right, :])

    def neck(self, frames: np.ndarray) -> np.ndarray:
        """Derived neck landmark: midpoint of the shoulders, per frame."""
        return 0.5 * (frames[..., self.shoulder_left, :] + frames[..., self.shoulder_right, :])

    def without_joints(self, drop: set[int]) -> tuple["SkeletonTopology", np.ndarray]:
        """Remove joints, re-index the survivors and return (topology, keep indices).

        Edges incident to a dropped joint are removed. Named landmarks must
        all survive.
        """
        dropped = set(drop)
        lost = dropped & set(self.landmarks().values())
        if lost:
            raise ValueError(f"cannot drop named landmark joints {sorted(lost)}")
        keep = np.array([i for i in range(self.joint_count) if i not in dropped], dtype=np.int64)
        remap = {old: new for new, old in enumerate(keep.tolist())}
        new_edges = tuple(
            (remap[a], remap[b]) for a, b in self.edges if a in remap and b in remap
        )
        topo = replace(
            self,
            joint_count=len(keep),
            edges=new_edges,
            facial_indices=frozenset(remap[f] for f in self.facial_indices if f in remap),
            **{name: remap[idx] for name, idx in self.landmarks().items()},
        )
        return topo, keep

    def to_dict(self) -> dict:
        d = {
            "joint_count": self.joint_count,
            "edges": [list(e) for e in self.edges],
            "facial_indices": sorted(self.facial_indices),
            "channel_count": self.channel_count,
        }
        d.update(self.landmarks())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonTopology":
        return cls(
            joint_count=int(d["joint_count"]),
            edges=tuple((int(a), int(b)) for a, b in d["edges"]),
            facial_indices=frozenset(int(f) for f in d.get("facial_indices", ())),
            channel_count=int(d.get("channel_count", 2)),
            **{name: int(d[name]) for name in (
                "nose", "shoulder_left", "shoulder_right", "hip_left", "hip_right",
                "knee_left", "knee_right", "ankle_left", "ankle_right",
            )},
        )


def coco17() -> SkeletonTopology:
    """The full 17-joint skeleton; facial keypoints are the eyes and ears (1-4)."""
    return SkeletonTopology(
        joint_count=17,
        edges=COCO17_EDGES,
        nose=0,
        shoulder_left=5,
        shoulder_right=6,
        hip_left=11,
        hip_right=12,
        knee_left=13,
        knee_right=14,
        ankle_left=15,
        ankle_right=16,
        facial_indices=frozenset({1, 2, 3, 4}),
    )
