"""Subject-exclusive and clip-level stratified train/val/test partitioning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PoseSequence

SET_NAMES = ("train", "val", "test")


class SplitError(ValueError):
    """The requested partition cannot be built from this dataset."""


@dataclass
class Partition:
    train: list[str] = field(default_factory=list)
    val: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)
    strategy: str = "inter"
    seed: int = 0

    def sets(self) -> dict[str, list[str]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def split(self, name: str) -> list[str]:
        if name not in SET_NAMES:
            raise KeyError(f"unknown split {name!r}, expected one of {SET_NAMES}")
        return self.sets()[name]

    def to_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test),
                "strategy": self.strategy, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        return cls(train=list(d["train"]), val=list(d["val"]), test=list(d["test"]),
                   strategy=d.get("strategy", "inter"), seed=int(d.get("seed", 0)))


def check_partition(partition: Partition, sequences: list[PoseSequence]) -> None:
    """Assert disjointness and exact coverage; for inter, subject exclusivity too."""
    all_ids = [s.clip_id for s in sequences]
    assigned = partition.train + partition.val + partition.test
    if len(assigned) != len(set(assigned)):
        raise SplitError("partition assigns a clip to more than one set")
    if set(assigned) != set(all_ids):
        raise SplitError("partition does not cover the dataset exactly once")
    if partition.strategy == "inter":
        subject_of = {s.clip_id: s.subject_id for s in sequences}
        seen: dict[str, str] = {}
        for name, ids in partition.sets().items():
            for cid in ids:
                subj = subject_of[cid]
                if seen.setdefault(subj, name) != name:
                    raise SplitError(f"subject {subj} appears in both {seen[subj]} and {name}")


def split_inter(
    sequences: list[PoseSequence],
    ratios: tuple[float, float, float] = (0.65, 0.15, 0.2),
    seed: int = 0,
    ratio_tolerance: float = 0.10,
) -> Partition:
    """Assign whole subjects to train/val/test, stratified by class.

    Greedy packing: subjects in seeded order, largest clip count first; each
    subject goes to the set whose per-class quota is furthest from filled.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise SplitError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {sum(ratios)}")

    by_subject: dict[str, list[PoseSequence]] = {}
    for s in sequences:
        by_subject.setdefault(s.subject_id, []).append(s)
    subjects = sorted(by_subject)
    if len(subjects) < 3:
        raise SplitError(f"need at least 3 subjects for an inter split, got {len(subjects)}")
    class_subjects = {0: 0, 1: 0}
    for subj in subjects:
        labels = {s.label for s in by_subject[subj]}
        for lab in labels:
            class_subjects[lab] += 1
    if min(class_subjects.values()) < 1:
        raise SplitError(
            "infeasible stratification: need at least one subject per class, "
            f"got {class_subjects}"
        )

    rng = np.random.default_rng(seed)
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    order.sort(key=lambda subj: -len(by_subject[subj]))  # stable: ties keep seeded order

    class_total = {c: sum(1 for s in sequences if s.label == c) for c in (0, 1)}
    target = {
        name: {c: ratios[i] * class_total[c] for c in (0, 1)}
        for i, name in enumerate(SET_NAMES)
    }
    current = {name: {0: 0, 1: 0} for name in SET_NAMES}
    assignment: dict[str, list[str]] = {name: [] for name in SET_NAMES}

    for subj in order:
        counts = {c: sum(1 for s in by_subject[subj] if s.label == c) for c in (0, 1)}
        best, best_score = None, None
        for name in SET_NAMES:
            score = sum(
                counts[c] * (target[name][c] - current[name][c]) / max(target[name][c], 1.0)
                for c in (0, 1)
            )
            if best_score is None or score > best_score:
                best, best_score = name, score
        for s in by_subject[subj]:
            assignment[best].append(s.clip_id)
        for c in (0, 1):
            current[best][c] += counts[c]

    for name in SET_NAMES:
        if not assignment[name]:
            raise SplitError(f"infeasible stratification: set {name} received no clips")

    global_pos = class_total[1] / max(len(sequences), 1)
    for name in SET_NAMES:
        n = current[name][0] + current[name][1]
        pos = current[name][1] / n
        # whole subjects move at once, so small sets cannot be tuned finer than
        # half the largest subject they hold; widen the tolerance accordingly
        members = set(assignment[name])
        largest = max(
            (len(by_subject[subj]) for subj in by_subject
             if by_subject[subj][0].clip_id in members), default=0
        )
        granularity = 0.5 * largest / n if n else 0.0
        if abs(pos - global_pos) > max(ratio_tolerance, granularity):
            raise SplitError(
                f"stratification failed: set {name} positive ratio {pos:.3f} "
                f"deviates more than {ratio_tolerance} from global {global_pos:.3f}"
            )

    part = Partition(strategy="inter", seed=seed, **assignment)
    check_partition(part, sequences)
    return part


def split_intra(
    sequences: list[PoseSequence],
    train_count: int,
    test_count: int,
    val_count: int,
    seed: int = 0,
) -> Partition:
    """Clip-level stratified split with exact set sizes; subjects may span sets."""
    n = len(sequences)
    if train_count + test_count + val_count != n:
        raise SplitError(
            f"counts {train_count}/{test_count}/{val_count} do not sum to dataset size {n}"
        )
    targets = {"train": train_count, "val": val_count, "test": test_count}
    rng = np.random.default_rng(seed)
    assignment: dict[str, list[str]] = {name: [] for name in SET_NAMES}
    filled = {name: 0 for name in SET_NAMES}
    for label in (0, 1):
        clips = [s.clip_id for s in sequences if s.label == label]
        clips = [clips[i] for i in rng.permutation(len(clips))]
        for cid in clips:
            best, best_score = None, None
            for name in SET_NAMES:
                if targets[name] == 0 or filled[name] >= targets[name]:
                    continue
                score = (targets[name] - filled[name]) / targets[name]
                if best_score is None or score > best_score:
                    best, best_score = name, score
            assignment[best].append(cid)
            filled[best] += 1
    part = Partition(strategy="intra", seed=seed, **assignment)
    check_partition(part, sequences)
    return part
