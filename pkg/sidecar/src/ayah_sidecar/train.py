"""Fine-tune the pair-classification cross-encoder from an exported pairs file.

Input is the pipeline's pairs JSONL (question_id, passage_id, question_en,
passage_en, label per line). The default objective is pointwise binary
cross-entropy on the relevance label; ``loss="pairwise"`` instead applies a
margin ranking loss over same-question (positive, negative) combinations.
Per-epoch training loss is logged, and pairwise training accuracy is
measured before and after so every run reports its improvement over the
seed-initialized baseline.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import torch

from .model import (
    DEFAULT_BASE,
    CrossEncoder,
    ModelConfig,
    build_model,
    pair_features,
    pairwise_accuracy,
    save_checkpoint,
)

logger = logging.getLogger(__name__)


class SidecarDataError(Exception):
    """Bad or empty training input; raised before any training starts."""


@dataclass
class TrainConfig:
    pairs_path: str
    out_dir: str
    base: str = DEFAULT_BASE
    epochs: int = 1
    learning_rate: float = 0.05
    batch_size: int = 8
    seed: int = 0
    loss: str = "pointwise"  # or "pairwise"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in ("pointwise", "pairwise"):
            raise ValueError(f"loss must be pointwise or pairwise, got {self.loss!r}")


def load_pairs_file(path: str | Path) -> list[dict]:
    records: list[dict] = []
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SidecarDataError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
            for key in ("question_id", "question_en", "passage_en", "label"):
                if key not in obj:
                    raise SidecarDataError(f"{path}:{line_no}: missing key {key!r}")
            if obj["label"] not in (0, 1):
                raise SidecarDataError(f"{path}:{line_no}: label must be 0 or 1")
            records.append(obj)
    if not records:
        raise SidecarDataError(f"{path}: no training pairs")
    return records


def _batches(records: list[dict], size: int):
    for i in range(0, len(records), size):
        yield records[i : i + size]


def _forward_batch(model: CrossEncoder, batch: list[dict]) -> torch.Tensor:
    flat: list[int] = []
    offsets: list[int] = []
    for r in batch:
        offsets.append(len(flat))
        flat.extend(pair_features(r["question_en"], r["passage_en"], model.config.buckets))
    return model(
        torch.tensor(flat, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)
    )


def _pointwise_epoch(model, records, optimizer, batch_size) -> float:
    criterion = torch.nn.BCEWithLogitsLoss()
    total, count = 0.0, 0
    for batch in _batches(records, batch_size):
        optimizer.zero_grad()
        logits = _forward_batch(model, batch)
        labels = torch.tensor([float(r["label"]) for r in batch])
        loss = criterion(logits, labels)
        loss.backward()
        optimizer.step()
        total += float(loss.detach()) * len(batch)
        count += len(batch)
    return total / count


def _pairwise_epoch(model, records, optimizer, batch_size) -> float:
    # margin ranking over same-question (positive, negative) combinations
    criterion = torch.nn.MarginRankingLoss(margin=1.0)
    by_question: dict[str, dict[int, list[dict]]] = {}
    for r in records:
        by_question.setdefault(r["question_id"], {0: [], 1: []})[r["label"]].append(r)
    combos = [
        (pos, neg)
        for groups in by_question.values()
        for pos in groups[1]
        for neg in groups[0]
    ]
    if not combos:
        raise SidecarDataError("pairwise loss needs questions with both labels")
    total, count = 0.0, 0
    for batch in _batches(combos, batch_size):
        optimizer.zero_grad()
        pos_logits = _forward_batch(model, [p for p, _ in batch])
        neg_logits = _forward_batch(model, [n for _, n in batch])
        loss = criterion(pos_logits, neg_logits, torch.ones(len(batch)))
        loss.backward()
        optimizer.step()
        total += float(loss.detach()) * len(batch)
        count += len(batch)
    return total / count


def finetune(config: TrainConfig) -> Path:
    """Train, save the checkpoint, and write metrics.json beside it."""
    records = load_pairs_file(config.pairs_path)

    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    model = build_model(ModelConfig.from_base(config.base, seed=config.seed))
    baseline_accuracy = pairwise_accuracy(model, records)
    logger.info("untrained pairwise accuracy: %s", baseline_accuracy)

    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    epoch_fn = _pointwise_epoch if config.loss == "pointwise" else _pairwise_epoch
    losses = []
    model.train()
    for epoch in range(1, config.epochs + 1):
        mean_loss = epoch_fn(model, records, optimizer, config.batch_size)
        losses.append(mean_loss)
        logger.info("epoch %d/%d: loss %.6f", epoch, config.epochs, mean_loss)

    trained_accuracy = pairwise_accuracy(model, records)
    logger.info("fine-tuned pairwise accuracy: %s", trained_accuracy)

    out = save_checkpoint(model, config.out_dir)
    metrics = {
        "pairs": len(records),
        "epochs": config.epochs,
        "loss": config.loss,
        "epoch_losses": losses,
        "untrained_pairwise_accuracy": baseline_accuracy,
        "pairwise_accuracy": trained_accuracy,
        "base": config.base,
        "seed": config.seed,
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    return out
