"""Training pair construction: positives plus sampled negatives per question.

Each question contributes all of its positively judged passages (label 1)
and a quota of sampled negatives (label 0); the combined per-question list
is shuffled and questions are concatenated in input order. All randomness
flows through per-question SplitMix64 streams keyed by (seed, question id,
purpose), so output is bit-identical across runs and platforms, and adding
or removing a question never changes another question's draws.

The negative quota is ceil(neg_ratio * max(1, positives)): the max(1, .)
floor means zero-answer questions still contribute negatives, so a trained
scorer sees unanswerable questions too. Uniform sampling draws from all
non-positive passages; "lexical-hard" instead takes the top-scoring
non-positives under the fitted BM25 scorer (ties by passage id ascending).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, PassageId, parse_passage_id
from .dataset import Judgment, Question
from .errors import MissingTranslationError, ParseError
from .fileio import atomic_write_text
from .rng import stream
from .scorer import Bm25Scorer

logger = logging.getLogger(__name__)

STRATEGIES = ("uniform", "lexical-hard")


@dataclass(frozen=True)
class SamplingConfig:
    neg_ratio: float = 2.0
    seed: int = 0
    strategy: str = "uniform"

    def __post_init__(self):
        if self.neg_ratio < 0:
            raise ValueError(f"neg_ratio must be >= 0, got {self.neg_ratio}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")


@dataclass(frozen=True)
class TrainingPair:
    question_id: str
    passage_id: PassageId
    label: int


@dataclass
class NegativeSample:
    passage_ids: list[PassageId]
    pool_exhausted: bool = False


def _positives_for(question_id: str, judgments: Sequence[Judgment]) -> set[PassageId]:
    return {j.passage_id for j in judgments if j.question_id == question_id and j.relevance == 1}


def sample_negatives(
    question: Question,
    corpus: Corpus,
    judgments: Sequence[Judgment],
    cfg: SamplingConfig,
    *,
    bm25: Bm25Scorer | None = None,
) -> NegativeSample:
    """Quota of non-positive passage ids for one question.

    When the non-positive pool is smaller than the quota, returns the whole
    pool with the pool_exhausted flag set instead of failing.
    """
    if len(corpus) == 0:
        raise ValueError("cannot sample negatives from an empty corpus")
    positives = _positives_for(question.id, judgments)
    return _sample_negatives(question, corpus, positives, cfg, bm25)


def _sample_negatives(
    question: Question,
    corpus: Corpus,
    positives: set[PassageId],
    cfg: SamplingConfig,
    bm25: Bm25Scorer | None,
) -> NegativeSample:
    quota = math.ceil(cfg.neg_ratio * max(1, len(positives)))
    pool = [p for p in corpus if p.id not in positives]
    if quota == 0:
        return NegativeSample([], False)
    exhausted = len(pool) < quota
    if exhausted:
        logger.warning(
            "question %s: only %d non-positive passages available for quota %d",
            question.id,
            len(pool),
            quota,
        )
    take = min(quota, len(pool))

    if cfg.strategy == "uniform":
        rng = stream(cfg.seed, question.id, "neg")
        return NegativeSample([p.id for p in rng.sample(pool, take)], exhausted)

    # lexical-hard: highest BM25 scores among non-positives, ties by id.
    if bm25 is None:
        bm25 = Bm25Scorer().fit(corpus)
    if not question.text_en:
        raise MissingTranslationError(
            f"question {question.id} has no English text; lexical-hard sampling needs it"
        )
    scores = bm25.score_texts(question.text_en, [p.text_en for p in pool])
    ranked = sorted(zip(pool, scores), key=lambda ps: (-ps[1], str(ps[0].id)))
    return NegativeSample([p.id for p, _ in ranked[:take]], exhausted)


def build_pairs(
    questions: Sequence[Question],
    corpus: Corpus,
    judgments: Sequence[Judgment],
    cfg: SamplingConfig,
) -> list[TrainingPair]:
    """Labeled pairs for every question, deterministic given inputs and seed."""
    positives_by_q: dict[str, list[PassageId]] = {}
    positive_sets: dict[str, set[PassageId]] = {}
    for j in judgments:
        if j.relevance == 1:
            positives_by_q.setdefault(j.question_id, []).append(j.passage_id)
            positive_sets.setdefault(j.question_id, set()).add(j.passage_id)

    bm25 = Bm25Scorer().fit(corpus) if cfg.strategy == "lexical-hard" else None
    pairs: list[TrainingPair] = []
    for q in questions:
        positives = positives_by_q.get(q.id, [])
        negatives = _sample_negatives(q, corpus, positive_sets.get(q.id, set()), cfg, bm25)
        combined = [(pid, 1) for pid in positives] + [(pid, 0) for pid in negatives.passage_ids]
        stream(cfg.seed, q.id, "shuffle").shuffle(combined)
        pairs.extend(TrainingPair(q.id, pid, label) for pid, label in combined)
    return pairs


def export_pairs(
    pairs: Sequence[TrainingPair],
    questions: Sequence[Question],
    corpus: Corpus,
    path: str | Path,
) -> None:
    """Write pairs JSONL with English texts resolved verbatim.

    Keys per line: question_id, passage_id, question_en, passage_en, label.
    An empty pair list produces an empty (0 byte) file.
    """
    by_id = {q.id: q for q in questions}
    lines: list[str] = []
    for pair in pairs:
        q = by_id.get(pair.question_id)
        if q is None:
            raise MissingTranslationError(f"pair references unknown question {pair.question_id}")
        if not q.text_en:
            raise MissingTranslationError(
                f"question {q.id} has no English text; translate before exporting pairs"
            )
        passage = corpus[pair.passage_id]
        lines.append(
            json.dumps(
                {
                    "question_id": pair.question_id,
                    "passage_id": str(pair.passage_id),
                    "question_en": q.text_en,
                    "passage_en": passage.text_en,
                    "label": pair.label,
                },
                ensure_ascii=False,
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_pairs(path: str | Path) -> list[dict]:
    """Read back an exported pairs file, in order."""
    records: list[dict] = []
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line_no=line_no) from exc
            for key in ("question_id", "passage_id", "question_en", "passage_en", "label"):
                if key not in obj:
                    raise ParseError(f"missing key {key!r}", path=str(path), line_no=line_no)
            if obj["label"] not in (0, 1):
                raise ParseError(f"label must be 0 or 1, got {obj['label']!r}", path=str(path), line_no=line_no)
            parse_passage_id(obj["passage_id"])
            records.append(obj)
    return records
