"""Training loop, evaluation, prediction and the analysis probes.

Every random stream is derived from the named seeds in the config, so two
runs with the same inputs produce the same artifacts. Evaluation embeds
clips one at a time with per-clip substreams, which makes the per-clip
records independent of batching and ordering.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augment import augment
from .config import RunConfig, resolved_json
from .data import PoseSequence
from .losses import bce, loss_total, loss_unc
from .metrics import (
    MetricReport,
    PredictionRecord,
    SweepRow,
    UncertaintyEstimate,
    full_report,
    sweep_threshold,
    threshold_grid,
    uncertainty_accuracy,
)
from .model import UncertaintyClassifier, build_model, load_checkpoint, save_checkpoint
from .preprocess import preprocess_pipeline
from .splits import Partition, check_partition, split_inter, split_intra
from .topology import SkeletonTopology
from .uncertainty import (
    aleatoric,
    mc_epistemic,
    mc_predictive_probability,
    mc_predictive_probability_torch,
    total_uncertainty,
)


def _entropy(*parts) -> list[int]:
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(int.from_bytes(hashlib.sha256(p.encode()).digest()[:8], "little"))
        else:
            out.append(int(p))
    return out


def np_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(_entropy(*parts)))


def torch_generator(*parts) -> torch.Generator:
    seed = np.random.SeedSequence(_entropy(*parts)).generate_state(1, dtype=np.uint64)[0]
    gen = torch.Generator()
    gen.manual_seed(int(seed & (2**63 - 1)))
    return gen


def lr_at_epoch(config, epoch: int) -> float:
    """Linear warmup from base_lr/warmup_epochs, then step decay at the milestones."""
    if epoch < 1:
        raise ValueError("epochs are 1-indexed")
    if epoch <= config.warmup_epochs:
        return config.base_lr * epoch / config.warmup_epochs
    decays = sum(1 for m in config.effective_milestones() if epoch >= m)
    return config.base_lr * config.gamma**decays


def _pad_batch(clips: list[PoseSequence], dtype=torch.float32) -> tuple[torch.Tensor, torch.Tensor]:
    """Right-pad with the last frame to the batch maximum; lengths mask pooling."""
    lengths = torch.tensor([c.n_frames for c in clips], dtype=torch.long)
    m_max = int(lengths.max())
    batch = np.empty((len(clips), m_max, *clips[0].frames.shape[1:]), dtype=np.float64)
    for i, clip in enumerate(clips):
        m = clip.n_frames
        batch[i, :m] = clip.frames
        if m < m_max:
            batch[i, m:] = clip.frames[-1]
    return torch.as_tensor(batch, dtype=dtype), lengths


@dataclass
class TrainResult:
    model: UncertaintyClassifier
    config: RunConfig
    topology: SkeletonTopology  # after preprocessing
    partition: Partition
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_auc: float = float("nan")
    checkpoint_path: Path | None = None


def build_partition(sequences: list[PoseSequence], config: RunConfig) -> Partition:
    pc = config.partition
    if pc.strategy == "inter":
        return split_inter(sequences, tuple(pc.ratios), pc.seed)
    if pc.counts is None:
        raise ValueError("intra partition needs partition.counts = [train, test, val]")
    return split_intra(sequences, pc.counts[0], pc.counts[1], pc.counts[2], pc.seed)


def _preprocess_all(
    sequences: list[PoseSequence], topology: SkeletonTopology, config: RunConfig
) -> tuple[dict[str, PoseSequence], SkeletonTopology]:
    cache: dict[str, PoseSequence] = {}
    topo = topology
    for seq in sequences:
        processed, topo = preprocess_pipeline(seq, topology, config.preprocess)
        cache[seq.clip_id] = processed
    return cache, topo


def _forward_losses(
    model: UncertaintyClassifier,
    frames: torch.Tensor,
    lengths: torch.Tensor,
    labels: torch.Tensor,
    config: RunConfig,
    g_dropout: torch.Generator,
    g_mc: torch.Generator,
) -> dict[str, torch.Tensor]:
    h = model.encoder(frames, lengths)
    mu, u_e, _ = mc_epistemic(h, model.heads, config.udm.T_train, g_dropout)
    u_a = aleatoric(h, model.heads)
    sigma2 = total_uncertainty(u_a, u_e, model.heads)
    p_mc = mc_predictive_probability_torch(mu, sigma2, config.udm.N, g_mc)
    p_f = model.fusion(h, u_e, u_a, p_mc=p_mc, generator=g_dropout)
    l_cls = bce(p_f, labels)
    l_unc = loss_unc(p_mc, labels, sigma2, config.loss.lambda0, config.loss.penalty)
    l_mu = bce(torch.sigmoid(mu), labels) if config.loss.use_l_mu else None
    total = loss_total(l_cls, l_unc, config.loss.lambda1, l_mu)
    return {
        "total": total,
        "cls": l_cls,
        "unc": l_unc,
        "mu": l_mu if l_mu is not None else torch.zeros(()),
    }


def train(
    config: RunConfig,
    sequences: list[PoseSequence],
    topology: SkeletonTopology,
    partition: Partition | None = None,
    out_dir: str | Path | None = None,
    quiet: bool = True,
) -> TrainResult:
    if partition is None:
        partition = build_partition(sequences, config)
    check_partition(partition, sequences)
    if not partition.train:
        raise ValueError("empty training set")

    tc = config.train
    seeds = tc.seeds
    clips, topo = _preprocess_all(sequences, topology, config)
    labels_of = {s.clip_id: s.label for s in sequences}

    model = build_model(topo, config, seed=seeds.global_seed)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=tc.base_lr, momentum=tc.momentum, weight_decay=tc.weight_decay
    )
    g_dropout = torch_generator(seeds.dropout, "train")
    g_mc = torch_generator(seeds.mc, "train")

    history: list[dict] = []
    best_epoch, best_auc, best_state = 0, float("nan"), None
    # primary criterion is validation AUC-ROC; ties go to the higher-accuracy
    # (and then later) epoch, since a freshly-ranked model can still have all
    # of its probabilities on one side of the threshold
    best_key: tuple = (float("-inf"), float("-inf"), -1)

    for epoch in range(1, tc.epochs + 1):
        lr = lr_at_epoch(tc, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()

        order = list(partition.train)
        perm = np_rng(seeds.global_seed, "order", epoch).permutation(len(order))
        order = [order[i] for i in perm]

        sums = {"total": 0.0, "cls": 0.0, "unc": 0.0, "mu": 0.0}
        n_batches = 0
        for start in range(0, len(order), tc.batch_size):
            batch_ids = order[start:start + tc.batch_size]
            if len(batch_ids) < 2:
                continue  # batch statistics in the heads need more than one sample
            batch_clips = [
                augment(clips[cid], np_rng(seeds.augment, epoch, cid), config.augment)
                for cid in batch_ids
            ]
            frames, lengths = _pad_batch(batch_clips)
            y = torch.tensor([labels_of[cid] for cid in batch_ids], dtype=frames.dtype)
            losses = _forward_losses(model, frames, lengths, y, config, g_dropout, g_mc)
            if not torch.isfinite(losses["total"]):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches} (clips {batch_ids})"
                )
            optimizer.zero_grad()
            losses["total"].backward()
            if tc.clip_grad_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), tc.clip_grad_norm)
            optimizer.step()
            for key in sums:
                sums[key] += float(losses[key].detach())
            n_batches += 1
        if n_batches == 0:
            raise ValueError("training set yields no usable batch (need >= 2 clips per batch)")

        val_acc = val_auc = float("nan")
        if partition.val:
            val_records = evaluate_records(
                model, [clips[c] for c in partition.val],
                [labels_of[c] for c in partition.val], config
            )
            rep = full_report(val_records)
            val_acc, val_auc = rep.acc, rep.auc_roc
            key = (val_auc, val_acc, epoch)
            if key > best_key:
                best_key, best_epoch, best_auc = key, epoch, val_auc
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

        row = {
            "epoch": epoch,
            "lr": lr,
            "loss_total": sums["total"] / n_batches,
            "loss_cls": sums["cls"] / n_batches,
            "loss_unc": sums["unc"] / n_batches,
            "loss_mu": sums["mu"] / n_batches,
            "val_acc": val_acc,
            "val_auc_roc": val_auc,
        }
        history.append(row)
        if not quiet:
            print(f"epoch {epoch:3d} lr {lr:.4f} loss {row['loss_total']:.4f} "
                  f"val_auc {val_auc:.2f}")

    if best_state is not None:
        model.load_state_dict(best_state)
    else:
        best_epoch, best_auc = tc.epochs, float("nan")
    model.eval()

    result = TrainResult(
        model=model, config=config, topology=topo, partition=partition,
        history=history, best_epoch=best_epoch, best_val_auc=best_auc,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved").write_text(resolved_json(config), encoding="utf-8")
        _write_history(out / "history.csv", history)
        ckpt = out / "checkpoints" / "best.pt"
        save_checkpoint(ckpt, model, config, topo, meta={
            "epoch": best_epoch,
            "best_val_auc_roc": best_auc,
            "seeds": {"global": seeds.global_seed, "dropout": seeds.dropout,
                      "mc": seeds.mc, "augment": seeds.augment},
            "partition": partition.to_dict(),
            "raw_topology": topology.to_dict(),
        })
        result.checkpoint_path = ckpt
    return result


def _write_history(path: Path, history: list[dict]) -> None:
    cols = ["epoch", "lr", "loss_total", "loss_cls", "loss_unc", "loss_mu", "val_acc", "val_auc_roc"]
    lines = [",".join(cols)]
    for row in history:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _clip_estimate(
    model: UncertaintyClassifier,
    clip: PoseSequence,
    config: RunConfig,
) -> tuple[UncertaintyEstimate, float, torch.Tensor]:
    """Uncertainty bundle and fused probability for one preprocessed clip."""
    seeds = config.train.seeds
    frames, lengths = _pad_batch([clip])
    h = model.encoder(frames, lengths)
    g_clip = torch_generator(seeds.dropout, "eval", clip.clip_id)
    mu, u_e, probs = mc_epistemic(h, model.heads, config.udm.T_eval, g_clip)
    u_a = aleatoric(h, model.heads)
    sigma2 = total_uncertainty(u_a, u_e, model.heads)
    p = mc_predictive_probability(
        float(mu[0]), float(sigma2[0]), config.udm.N,
        np_rng(seeds.mc, "eval", clip.clip_id),
    )
    p_mc = torch.as_tensor([p], dtype=h.dtype)
    p_f = model.fusion(h, u_e, u_a, p_mc=p_mc)
    estimate = UncertaintyEstimate(
        mu=float(mu[0]), u_e=float(u_e[0]), u_a=float(u_a[0]), sigma2=float(sigma2[0]),
        sampled_probs=probs[0].numpy(),
    )
    return estimate, float(p_f[0]), h


@torch.no_grad()
def evaluate_records(
    model: UncertaintyClassifier,
    clips: list[PoseSequence],
    labels: list[int],
    config: RunConfig,
) -> list[PredictionRecord]:
    """Per-clip prediction records; clips must already be preprocessed."""
    model.eval()
    records = []
    for clip, label in zip(clips, labels):
        estimate, p_f, _ = _clip_estimate(model, clip, config)
        estimate.validate()
        records.append(PredictionRecord(clip.clip_id, int(label), p_f, estimate))
    return records


def evaluate(
    checkpoint: str | Path,
    sequences: list[PoseSequence],
    topology: SkeletonTopology,
    split: str,
    out_dir: str | Path | None = None,
) -> tuple[MetricReport, list[PredictionRecord]]:
    """Evaluate one partition split of a dataset against a saved checkpoint."""
    model, config, ckpt_topo, meta = load_checkpoint(checkpoint)
    if "partition" not in meta:
        raise ValueError("checkpoint carries no partition; cannot resolve the split")
    partition = Partition.from_dict(meta["partition"])
    ids = set(partition.split(split))
    chosen = [s for s in sequences if s.clip_id in ids]
    if len(chosen) != len(ids):
        missing = sorted(ids - {s.clip_id for s in chosen})[:3]
        raise ValueError(f"dataset is missing clips from the {split} split, e.g. {missing}")
    clips, topo = _preprocess_all(chosen, topology, config)
    if topo.joint_count != ckpt_topo.joint_count:
        raise ValueError(
            f"topology mismatch: checkpoint expects J={ckpt_topo.joint_count}, "
            f"data preprocesses to J={topo.joint_count}"
        )
    ordered = [clips[s.clip_id] for s in chosen]
    records = evaluate_records(model, ordered, [s.label for s in chosen], config)
    report = full_report(records)
    if out_dir is not None:
        write_eval_report(out_dir, records, report, config, split)
    return report, records


def predict(
    checkpoint: str | Path, seq: PoseSequence, topology: SkeletonTopology | None = None
) -> PredictionRecord:
    """Single-clip evaluation; identical to the clip's record from `evaluate`."""
    model, config, ckpt_topo, meta = load_checkpoint(checkpoint)
    if topology is None:
        if "raw_topology" not in meta:
            raise ValueError("checkpoint carries no raw topology; pass one explicitly")
        topology = SkeletonTopology.from_dict(meta["raw_topology"])
    clip, topo = preprocess_pipeline(seq, topology, config.preprocess)
    if topo.joint_count != ckpt_topo.joint_count:
        raise ValueError(
            f"topology mismatch: checkpoint expects J={ckpt_topo.joint_count}, "
            f"clip preprocesses to J={topo.joint_count}"
        )
    with torch.no_grad():
        model.eval()
        estimate, p_f, _ = _clip_estimate(model, clip, config)
    estimate.validate()
    return PredictionRecord(seq.clip_id, int(seq.label), p_f, estimate)


@torch.no_grad()
def noise_probe(
    model: UncertaintyClassifier,
    seq: PoseSequence,
    topology: SkeletonTopology,
    config: RunConfig,
    levels: list[float],
    draws: int = 10,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Mean aleatoric uncertainty of one clip under growing coordinate noise.

    Noise std at level L is L times the per-channel std of the preprocessed
    clip; level 0 reports the clean clip exactly.
    """
    if sorted(levels) != list(levels) or any(l < 0 for l in levels):
        raise ValueError("levels must be non-negative and ascending")
    model.eval()
    clip, _ = preprocess_pipeline(seq, topology, config.preprocess)
    std = clip.frames.std(axis=(0, 1))  # (C,)
    rows = []
    for level in levels:
        values = []
        n_draws = 1 if level == 0 else draws
        for d in range(n_draws):
            frames = clip.frames
            if level > 0:
                rng = np_rng(seed, "probe", clip.clip_id, repr(float(level)), d)
                frames = frames + rng.standard_normal(frames.shape) * (level * std)
            batch, lengths = _pad_batch([clip.with_frames(frames)])
            h = model.encoder(batch, lengths)
            values.append(float(aleatoric(h, model.heads)[0]))
        rows.append((float(level), float(np.mean(values))))
    return rows


@torch.no_grad()
def export_embeddings(
    model: UncertaintyClassifier,
    clips: list[PoseSequence],
    labels: list[int],
    config: RunConfig,
) -> list[dict]:
    """Raw embedding and fused representation per clip, for external projection."""
    model.eval()
    seeds = config.train.seeds
    rows = []
    for clip, label in zip(clips, labels):
        frames, lengths = _pad_batch([clip])
        h = model.encoder(frames, lengths)
        g_clip = torch_generator(seeds.dropout, "eval", clip.clip_id)
        _, u_e, _ = mc_epistemic(h, model.heads, config.udm.T_eval, g_clip)
        u_a = aleatoric(h, model.heads)
        h_e = model.fusion.fuse_epistemic(h, u_e)
        h_a = model.fusion.fuse_aleatoric(h, u_a)
        fused = torch.cat([h_e, h_a], dim=-1)
        rows.append({
            "clip_id": clip.clip_id,
            "label": int(label),
            "embedding": h[0].numpy().astype(np.float64),
            "fused": fused[0].numpy().astype(np.float64),
        })
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(path: str | Path, records: list[PredictionRecord]) -> None:
    cols = ["clip_id", "y_true", "p_f", "hard_label", "mu", "u_e", "u_a", "sigma2"]
    lines = [",".join(cols)]
    for r in records:
        e = r.estimate
        lines.append(",".join(_fmt(v) for v in (
            r.clip_id, r.y_true, r.p_f, r.hard_label, e.mu, e.u_e, e.u_a, e.sigma2)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records_csv(path: str | Path) -> list[PredictionRecord]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    records = []
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        records.append(PredictionRecord(
            clip_id=row["clip_id"],
            y_true=int(row["y_true"]),
            p_f=float(row["p_f"]),
            estimate=UncertaintyEstimate(
                mu=float(row["mu"]), u_e=float(row["u_e"]),
                u_a=float(row["u_a"]), sigma2=float(row["sigma2"]),
            ),
        ))
    return records


def write_sweep_csv(path: str | Path, rows: list[SweepRow]) -> None:
    cols = ["u_t", "retained_positive", "retained_negative", "acc", "sn", "sp"]
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, c)) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_eval_report(
    out_dir: str | Path,
    records: list[PredictionRecord],
    report: MetricReport,
    config: RunConfig,
    split: str,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "split": split,
        "n_records": len(records),
        "metrics": report.to_dict(),
        "parameters": {
            "T_train": config.udm.T_train,
            "T_eval": config.udm.T_eval,
            "N": config.udm.N,
            "uncertainty_normalization": "min-max over the evaluated record set",
        },
    }
    (out / "metrics.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "config.resolved").write_text(resolved_json(config), encoding="utf-8")
    write_records_csv(out / "records.csv", records)
    write_sweep_csv(out / "sweep.csv", sweep_threshold(records))
    grid = threshold_grid()
    lines = ["u_t,ua_epistemic,ua_aleatoric,ua_total"]
    for t in grid:
        lines.append(",".join(_fmt(v) for v in (
            float(t),
            uncertainty_accuracy(records, float(t), "epistemic"),
            uncertainty_accuracy(records, float(t), "aleatoric"),
            uncertainty_accuracy(records, float(t), "total"),
        )))
    (out / "ua.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
