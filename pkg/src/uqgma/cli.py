"""Command-line surface.

Subcommands: synth, train, eval, predict, sweep, probe, export-embeddings,
augment-preview. Flags override config-file values, which override defaults;
each artifact-producing run writes the fully resolved config next to its
outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import trainer
from .augment import augment
from .config import RunConfig, apply_overrides, config_keys, load_config, resolved_json
from .data import load_clip, load_dataset, save_dataset
from .metrics import sweep_threshold
from .model import load_checkpoint
from .synthetic import generate


def _config_from_args(args) -> RunConfig:
    config = load_config(getattr(args, "config", None))
    overrides = getattr(args, "set", None) or []
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def _write_resolved(out_dir: Path, config: RunConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved").write_text(resolved_json(config), encoding="utf-8")


def _cmd_synth(args) -> int:
    config = _config_from_args(args)
    sequences, topology = generate(config.synth)
    out = Path(args.out)
    save_dataset(out, sequences, topology)
    _write_resolved(out, config)
    positives = sum(s.label for s in sequences)
    print(f"wrote {len(sequences)} clips ({positives} positive) to {out}")
    return 0


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    sequences, topology = load_dataset(args.data)
    result = trainer.train(config, sequences, topology, out_dir=args.out, quiet=not args.verbose)
    print(f"best epoch {result.best_epoch} val AUC-ROC {result.best_val_auc:.2f} "
          f"checkpoint {result.checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    sequences, topology = load_dataset(args.data)
    report, records = trainer.evaluate(args.checkpoint, sequences, topology, args.split,
                                       out_dir=args.out)
    print(f"{args.split}: n={len(records)} ACC {report.acc:.2f} SN {report.sn:.2f} "
          f"SP {report.sp:.2f} AUC-ROC {report.auc_roc:.2f} "
          f"AUC-UA(e) {report.auc_ua['epistemic']:.2f}")
    return 0


def _cmd_predict(args) -> int:
    seq = load_clip(args.clip)
    record = trainer.predict(args.checkpoint, seq)
    payload = {
        "clip_id": record.clip_id,
        "p_f": record.p_f,
        "hard_label": record.hard_label,
        "y_true": record.y_true,
        "mu": record.estimate.mu,
        "u_e": record.estimate.u_e,
        "u_a": record.estimate.u_a,
        "sigma2": record.estimate.sigma2,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "record.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    records = trainer.read_records_csv(args.records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trainer.write_sweep_csv(out / "sweep.csv", sweep_threshold(records))
    print(f"wrote sweep table for {len(records)} records to {out / 'sweep.csv'}")
    return 0


def _cmd_probe(args) -> int:
    seq = load_clip(args.clip)
    model, config, _, meta = load_checkpoint(args.checkpoint)
    from .topology import SkeletonTopology

    raw_topology = SkeletonTopology.from_dict(meta["raw_topology"])
    levels = [float(x) for x in args.levels.split(",") if x != ""]
    rows = trainer.noise_probe(model, seq, raw_topology, config, levels,
                               draws=args.draws, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["level,u_a"] + [f"{repr(level)},{repr(u_a)}" for level, u_a in rows]
    (out / "noise_probe.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_resolved(out, config)
    print(f"wrote noise probe over {len(rows)} levels to {out / 'noise_probe.csv'}")
    return 0


def _cmd_export_embeddings(args) -> int:
    sequences, topology = load_dataset(args.data)
    model, config, ckpt_topo, meta = load_checkpoint(args.checkpoint)
    from .splits import Partition

    partition = Partition.from_dict(meta["partition"])
    ids = set(partition.split(args.split))
    chosen = [s for s in sequences if s.clip_id in ids]
    clips, topo = trainer._preprocess_all(chosen, topology, config)
    if topo.joint_count != ckpt_topo.joint_count:
        raise ValueError("topology mismatch between checkpoint and data")
    rows = trainer.export_embeddings(
        model, [clips[s.clip_id] for s in chosen], [s.label for s in chosen], config
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = len(rows[0]["embedding"]) if rows else 0
    f = len(rows[0]["fused"]) if rows else 0
    header = (["clip_id", "label"] + [f"h{i}" for i in range(d)] + [f"fused{i}" for i in range(f)])
    lines = [",".join(header)]
    for row in rows:
        values = [row["clip_id"], str(row["label"])]
        values += [repr(float(v)) for v in row["embedding"]]
        values += [repr(float(v)) for v in row["fused"]]
        lines.append(",".join(values))
    (out / "embeddings.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_resolved(out, config)
    print(f"wrote {len(rows)} embedding rows to {out / 'embeddings.csv'}")
    return 0


def _cmd_augment_preview(args) -> int:
    config = _config_from_args(args)
    sequences, topology = load_dataset(args.data)
    by_id = {s.clip_id: s for s in sequences}
    if args.clip_id not in by_id:
        raise KeyError(f"clip {args.clip_id!r} not in dataset")
    seq = by_id[args.clip_id]
    trace: list[str] = []
    augmented = augment(seq, trainer.np_rng(args.seed, "preview", args.clip_id),
                        config.augment, trace=trace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "clip_id": args.clip_id,
        "seed": args.seed,
        "applied": trace,
        "before": seq.frames.tolist(),
        "after": augmented.frames.tolist(),
    }
    (out / "augment_preview.json").write_text(json.dumps(payload) + "\n", encoding="utf-8")
    _write_resolved(out, config)
    print(f"applied {trace or 'nothing'} to {args.clip_id}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k}" for k in config_keys())
    parser = argparse.ArgumentParser(
        prog="uqgma",
        description="Uncertainty-aware classification of infant general movements "
                    "from 2D pose sequences.",
        epilog="config keys accepted by --set (key.path=value):\n" + keys,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, e.g. --set train.epochs=20")

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    add_config_flags(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    add_config_flags(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a partition split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("predict", help="predict one clip file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip", required=True, help="standalone clip JSON file")
    p.add_argument("--out", help="optional output directory")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("sweep", help="uncertainty-threshold sweep over saved records")
    p.add_argument("--records", required=True, help="records.csv from eval")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("probe", help="aleatoric-uncertainty noise probe for one clip")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip", required=True)
    p.add_argument("--levels", default="0,0.1,0.2,0.3,0.4,0.5",
                   help="comma-separated noise levels (fractions of channel std)")
    p.add_argument("--draws", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_probe)

    p = sub.add_parser("export-embeddings", help="dump raw and fused representations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_export_embeddings)

    p = sub.add_parser("augment-preview", help="emit one clip before and after augmentation")
    add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--clip-id", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_augment_preview)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
