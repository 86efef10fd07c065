"""Tiny from-scratch cross-encoder over hashed joint features.

The model reads question and passage together: the feature set of a pair is
the union of hashed question tokens ("q:"), passage tokens ("p:") and the
tokens shared by both ("x:"), embedded with an EmbeddingBag and passed
through a small MLP to a single relevance logit. Hashing uses BLAKE2b, so
feature indices are stable across processes and platforms (Python's builtin
hash is salted per process and would break checkpoint portability).

Checkpoints are directories holding ``config.json`` (architecture preset,
bucket count, hidden width, seed) and ``weights.pt``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

PRESETS = {
    "tiny-crossencoder": {"buckets": 4096, "hidden": 16},
    "small-crossencoder": {"buckets": 16384, "hidden": 32},
}
DEFAULT_BASE = "tiny-crossencoder"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics (mirrors the pipeline's rule)."""
    tokens, current = [], []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def _bucket(key: str, buckets: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


def pair_features(question: str, passage: str, buckets: int) -> list[int]:
    q_tokens = tokenize(question)
    p_tokens = tokenize(passage)
    overlap = set(q_tokens) & set(p_tokens)
    indices = [_bucket("q:" + t, buckets) for t in q_tokens]
    indices += [_bucket("p:" + t, buckets) for t in p_tokens]
    indices += [_bucket("x:" + t, buckets) for t in sorted(overlap)]
    return indices or [_bucket("<empty>", buckets)]


@dataclass
class ModelConfig:
    base: str = DEFAULT_BASE
    buckets: int = 4096
    hidden: int = 16
    seed: int = 0

    @classmethod
    def from_base(cls, base: str, seed: int = 0) -> "ModelConfig":
        if base not in PRESETS:
            raise ValueError(f"unknown base model {base!r}; available: {sorted(PRESETS)}")
        preset = PRESETS[base]
        return cls(base=base, buckets=preset["buckets"], hidden=preset["hidden"], seed=seed)


class CrossEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.embed = nn.EmbeddingBag(config.buckets, config.hidden, mode="sum")
        self.mlp = nn.Sequential(
            nn.Linear(config.hidden, config.hidden),
            nn.ReLU(),
            nn.Linear(config.hidden, 1),
        )

    def forward(self, flat_indices: torch.Tensor, offsets: torch.Tensor) -> torch.Tensor:
        return self.mlp(self.embed(flat_indices, offsets)).squeeze(-1)

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        """Relevance logits for (question, passage) pairs, one batch."""
        flat: list[int] = []
        offsets: list[int] = []
        for question, passage in pairs:
            offsets.append(len(flat))
            flat.extend(pair_features(question, passage, self.config.buckets))
        self.eval()
        with torch.no_grad():
            logits = self.forward(
                torch.tensor(flat, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)
            )
        return [float(v) for v in logits.tolist()]


def build_model(config: ModelConfig) -> CrossEncoder:
    """Seed-initialized (untrained) model; the fine-tune baseline."""
    torch.manual_seed(config.seed)
    return CrossEncoder(config)


def save_checkpoint(model: CrossEncoder, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(asdict(model.config), indent=2) + "\n")
    torch.save(model.state_dict(), out / "weights.pt")
    return out


def load_checkpoint(model_dir: str | Path) -> CrossEncoder:
    model_dir = Path(model_dir)
    config = ModelConfig(**json.loads((model_dir / "config.json").read_text()))
    model = CrossEncoder(config)
    model.load_state_dict(torch.load(model_dir / "weights.pt", weights_only=True))
    model.eval()
    return model


def pairwise_accuracy(model: CrossEncoder, records: list[dict]) -> float | None:
    """Fraction of same-question (positive, negative) pairs ranked correctly.

    Returns None when no question carries both labels.
    """
    by_question: dict[str, dict[int, list[str]]] = {}
    for r in records:
        by_question.setdefault(r["question_id"], {0: [], 1: []})[r["label"]].append(
            r["passage_en"]
        )
    scores: dict[tuple[str, str], float] = {}
    batch = [(r["question_en"], r["passage_en"]) for r in records]
    for r, s in zip(records, model.score_pairs(batch)):
        scores[(r["question_id"], r["passage_en"])] = s

    correct = total = 0
    for qid, groups in by_question.items():
        for pos in groups[1]:
            for neg in groups[0]:
                total += 1
                if scores[(qid, pos)] > scores[(qid, neg)]:
                    correct += 1
    if total == 0:
        return None
    return correct / total
