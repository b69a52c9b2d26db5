"""Uncertainty-aware classification of infant general movements from 2D pose sequences."""

from .config import RunConfig, load_config
from .data import PoseSequence, load_clip, load_dataset, save_dataset
from .metrics import PredictionRecord, UncertaintyEstimate
from .splits import Partition, split_inter, split_intra
from .synthetic import SynthConfig, generate
from .topology import SkeletonTopology, coco17

__version__ = "0.1.0"

__all__ = [
    "Partition",
    "PoseSequence",
    "PredictionRecord",
    "RunConfig",
    "SkeletonTopology",
    "SynthConfig",
    "UncertaintyEstimate",
    "coco17",
    "generate",
    "load_clip",
    "load_config",
    "load_dataset",
    "save_dataset",
    "split_inter",
    "split_intra",
    "__version__",
]
