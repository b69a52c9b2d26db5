"""Run configuration: one schema for every module, JSON in and out.

Precedence is CLI overrides > config file > defaults, and every run writes
the fully resolved configuration next to its artifacts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

from .augment import AugmentConfig
from .encoder import EncoderConfig
from .fusion import UfmConfig
from .losses import LossConfig
from .preprocess import PreprocessConfig
from .synthetic import ClassMotionParams, SynthConfig
from .uncertainty import UdmConfig


@dataclass
class Seeds:
    # "global" seeds model init and batch order; the others drive their streams
    global_seed: int = 0
    dropout: int = 1
    mc: int = 2
    augment: int = 3

    _JSON_NAMES = {"global_seed": "global"}

    @classmethod
    def from_master(cls, master: int) -> "Seeds":
        return cls(global_seed=master, dropout=master + 1000,
                   mc=master + 2000, augment=master + 3000)


@dataclass
class TrainConfig:
    epochs: int = 100
    warmup_epochs: int = 5
    base_lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.001
    # None places the decay steps at the 50% and 75% marks of the run, which
    # is (50, 75) for the default 100 epochs; explicit values override that
    milestones: tuple[int, int] | None = None
    gamma: float = 0.1
    batch_size: int = 8
    # global gradient-norm cap; keeps the hot base lr stable on small batches.
    # None disables clipping.
    clip_grad_norm: float | None = 5.0
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        m1, m2 = self.effective_milestones()
        # explicit milestones may sit past the horizon (they never fire);
        # the derived default always lands inside it
        if not self.warmup_epochs < m1 < m2:
            raise ValueError(
                "need warmup_epochs < first milestone < second milestone, "
                f"got {self.warmup_epochs}, {(m1, m2)}"
            )
        if self.milestones is None and m2 > self.epochs:
            raise ValueError(f"derived milestones {(m1, m2)} exceed epochs {self.epochs}")
        if min(self.base_lr, self.gamma, self.batch_size) <= 0 or self.weight_decay < 0:
            raise ValueError("rates must be positive and weight_decay >= 0")

    def effective_milestones(self) -> tuple[int, int]:
        if self.milestones is not None:
            return tuple(self.milestones)
        return (round(0.5 * self.epochs), round(0.75 * self.epochs))


@dataclass
class PartitionConfig:
    strategy: str = "inter"  # inter | intra
    ratios: tuple[float, float, float] = (0.65, 0.15, 0.2)
    counts: tuple[int, int, int] | None = None  # train/test/val, for intra
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("inter", "intra"):
            raise ValueError(f"strategy must be inter|intra, got {self.strategy!r}")


@dataclass
class RunConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    udm: UdmConfig = field(default_factory=UdmConfig)
    ufm: UfmConfig = field(default_factory=UfmConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)


def _json_name(obj, f: dataclasses.Field) -> str:
    return getattr(type(obj), "_JSON_NAMES", {}).get(f.name, f.name)


def to_dict(obj) -> dict:
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        name = _json_name(obj, f)
        if is_dataclass(value):
            out[name] = to_dict(value)
        elif isinstance(value, tuple):
            out[name] = list(value)
        elif isinstance(value, frozenset):
            out[name] = sorted(value)
        else:
            out[name] = value
    return out


def _coerce(value, target_type):
    origin = getattr(target_type, "__origin__", None)
    if is_dataclass(target_type) and isinstance(value, dict):
        return from_dict(target_type, value)
    if origin is tuple and isinstance(value, (list, tuple)):
        args = target_type.__args__
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0]) for v in value)
        return tuple(_coerce(v, t) for v, t in zip(value, args))
    if target_type in (int, float, str, bool) and value is not None:
        return target_type(value)
    return value


def from_dict(cls, data: dict):
    kwargs = {}
    json_names = getattr(cls, "_JSON_NAMES", {})
    for f in fields(cls):
        name = json_names.get(f.name, f.name)
        if name not in data:
            continue
        target = f.type if not isinstance(f.type, str) else None
        value = data[name]
        if target is not None:
            value = _coerce(value, target)
        else:
            value = _coerce_by_default(cls, f, value)
        kwargs[f.name] = value
    return cls(**kwargs)


def _coerce_by_default(cls, f: dataclasses.Field, value):
    # dataclass field types are strings under `from __future__ import annotations`;
    # coerce based on the default value's type instead
    probe = cls()
    current = getattr(probe, f.name)
    if is_dataclass(current) and isinstance(value, dict):
        return from_dict(type(current), value)
    if isinstance(current, tuple) and isinstance(value, (list, tuple)):
        if current and is_dataclass(current[0]):
            return tuple(from_dict(type(current[0]), v) for v in value)
        return tuple(value)
    if isinstance(current, bool):
        return bool(value)
    if isinstance(current, int) and not isinstance(value, bool):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def load_config(path: str | Path | None = None) -> RunConfig:
    if path is None:
        return RunConfig()
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return from_dict(RunConfig, data)


def apply_overrides(config: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply `section.key=value` strings on top of a config; values parse as JSON."""
    data = to_dict(config)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key.path=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        for key in keys[:-1]:
            if key not in node or not isinstance(node[key], dict):
                raise KeyError(f"unknown config section {key!r} in override {item!r}")
            node = node[key]
        if keys[-1] not in node:
            raise KeyError(f"unknown config key {path!r}")
        node[keys[-1]] = value
    return from_dict(RunConfig, data)


def resolved_json(config: RunConfig) -> str:
    return json.dumps(to_dict(config), indent=2, sort_keys=True) + "\n"


def config_keys(config: RunConfig | None = None) -> list[str]:
    """Every dotted key the schema accepts, for --help and validation."""
    def walk(d: dict, prefix: str) -> list[str]:
        keys = []
        for name, value in d.items():
            dotted = f"{prefix}{name}"
            if isinstance(value, dict):
                keys.extend(walk(value, dotted + "."))
            else:
                keys.append(dotted)
        return keys

    return sorted(walk(to_dict(config or RunConfig()), ""))
