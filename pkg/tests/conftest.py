import numpy as np
import pytest

from uqgma.synthetic import SynthConfig, generate
from uqgma.topology import coco17


@pytest.fixture(scope="session")
def small_dataset():
    """20 subjects x 3 clips of 60 frames; enough structure for most tests."""
    cfg = SynthConfig(subjects_per_class=10, clips_per_subject=3, frames_per_clip=60, seed=11)
    return generate(cfg)


@pytest.fixture(scope="session")
def topology():
    return coco17()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_clip(rng, m=40, j=17, with_label=True):
    """A random but non-degenerate raw clip on the 17-joint skeleton."""
    from uqgma.data import PoseSequence

    base = rng.uniform(-50.0, 50.0, (1, j, 2))
    wiggle = rng.normal(0.0, 5.0, (m, j, 2))
    frames = base + wiggle
    # keep the trunk clearly non-degenerate
    frames[:, 5, :] += np.array([-30.0, -80.0])
    frames[:, 6, :] += np.array([30.0, -80.0])
    frames[:, 11, :] += np.array([-25.0, 40.0])
    frames[:, 12, :] += np.array([25.0, 40.0])
    return PoseSequence(
        clip_id=f"clip{rng.integers(1e9)}",
        subject_id="subj",
        fps=10.0,
        frames=frames,
        label=int(rng.integers(2)) if with_label else 0,
    )
