"""Rank corpus passages per question, threshold no-answer cases, and do run file I/O.

Every corpus passage is scored for every question (the corpus is small
enough that candidate pre-filtering buys nothing), sorted by score
descending with ties broken by passage id ascending in canonical string
order, and cut at k. An empty ranking encodes a "no answer" prediction;
in run files it is written as a single sentinel line with passage id
``NO-ANSWER``, rank 1, score 0, so "predicted unanswerable" stays
distinguishable from "not evaluated".

Run file format: standard six-column ``question_id Q0 passage_id rank
score tag`` lines, space-separated, scores rounded to 6 decimals on write
(in-memory values keep full precision).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, PassageId, parse_passage_id
from .dataset import Judgment, Question
from .errors import (
    IdRangeError,
    InvariantViolationError,
    MalformedIdError,
    MissingTranslationError,
    ParseError,
)
from .fileio import atomic_write_text
from .scorer import Scorer

NO_ANSWER_SENTINEL = "NO-ANSWER"
DEFAULT_K = 10


@dataclass(frozen=True)
class RankedEntry:
    passage_id: PassageId
    score: float
    rank: int


@dataclass
class RankedRun:
    entries: dict[str, list[RankedEntry]] = field(default_factory=dict)
    run_tag: str = "run"
    k: int = DEFAULT_K

    def question_ids(self) -> list[str]:
        return list(self.entries.keys())


@dataclass(frozen=True)
class Threshold:
    """Score floor for no-answer prediction; tau=None disables thresholding."""

    tau: float | None

    @classmethod
    def parse(cls, raw: str) -> "Threshold":
        if raw.strip().lower() == "none":
            return cls(None)
        return cls(float(raw))


def rank(question: Question, corpus: Corpus, scorer: Scorer, k: int = DEFAULT_K) -> list[RankedEntry]:
    """Top-k passages for one question under the canonical sort."""
    if len(corpus) == 0:
        raise ValueError("cannot rank against an empty corpus")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if scorer.needs_text and not question.text_en:
        raise MissingTranslationError(
            f"question {question.id} has no English text; run translate first"
        )
    passages = list(corpus)
    scores = scorer.score(question, passages)
    if len(scores) != len(passages):
        raise InvariantViolationError(
            "scores", f"scorer {scorer.name} returned {len(scores)} scores for {len(passages)} passages"
        )
    order = sorted(zip(passages, scores), key=lambda ps: (-ps[1], str(ps[0].id)))
    return [
        RankedEntry(passage_id=p.id, score=s, rank=i)
        for i, (p, s) in enumerate(order[:k], start=1)
    ]


def apply_threshold(entries: list[RankedEntry], threshold: Threshold) -> list[RankedEntry]:
    """Drop entries scoring below tau and renumber ranks contiguously."""
    if threshold.tau is None:
        return list(entries)
    kept = [e for e in entries if e.score >= threshold.tau]
    return [
        RankedEntry(passage_id=e.passage_id, score=e.score, rank=i)
        for i, e in enumerate(kept, start=1)
    ]


def build_run(
    questions: Sequence[Question],
    corpus: Corpus,
    scorer: Scorer,
    k: int = DEFAULT_K,
    threshold: Threshold = Threshold(None),
    run_tag: str = "run",
) -> RankedRun:
    """Rank every question in input order into one run."""
    run = RankedRun(run_tag=run_tag, k=k)
    for q in questions:
        run.entries[q.id] = apply_threshold(rank(q, corpus, scorer, k), threshold)
    return run


def tune_threshold(
    dev_questions: Sequence[Question],
    dev_judgments: Sequence[Judgment],
    corpus: Corpus,
    scorer: Scorer,
    grid: Sequence[float],
    k: int = DEFAULT_K,
) -> Threshold:
    """Pick the grid value maximizing dev MAP@10; ties go to the smaller tau.

    Questions are ranked once; each candidate tau only re-applies the
    threshold and re-evaluates.
    """
    from .evaluation import EvalConfig, evaluate

    if not grid:
        raise ValueError("threshold grid must be non-empty")
    dev_ids = {q.id for q in dev_questions}
    scoped_judgments = [j for j in dev_judgments if j.question_id in dev_ids]
    base_rankings = {q.id: rank(q, corpus, scorer, k) for q in dev_questions}
    best_tau: float | None = None
    best_map = -1.0
    for tau in sorted(grid):
        run = RankedRun(run_tag="tune", k=k)
        for q in dev_questions:
            run.entries[q.id] = apply_threshold(base_rankings[q.id], Threshold(tau))
        report = evaluate(run, scoped_judgments, list(dev_questions), EvalConfig())
        if report.aggregates.map10 > best_map:
            best_map = report.aggregates.map10
            best_tau = tau
    return Threshold(best_tau)


def write_run(run: RankedRun, path: str | Path) -> None:
    lines: list[str] = []
    for qid, entries in run.entries.items():
        if not entries:
            lines.append(f"{qid} Q0 {NO_ANSWER_SENTINEL} 1 0.000000 {run.run_tag}")
            continue
        for e in entries:
            lines.append(f"{qid} Q0 {e.passage_id} {e.rank} {e.score:.6f} {run.run_tag}")
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_run(path: str | Path) -> RankedRun:
    """Parse a run file, enforcing the ranked-entry invariants.

    Rejects non-contiguous or out-of-order ranks, duplicate passages for a
    question, and score increases down the ranking. Equal file scores are
    accepted in any id order: 6-decimal rounding on write can collapse
    distinct in-memory scores into a tie, so id order within a file-level
    tie is not significant.
    """
    per_question: dict[str, list[RankedEntry]] = {}
    no_answer: set[str] = set()
    tag: str | None = None
    with open(path, encoding="utf-8", newline="") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ParseError(
                    f"expected 6 space-separated fields, got {len(fields)}",
                    path=str(path),
                    line_no=line_no,
                )
            qid, _, pid_field, rank_field, score_field, line_tag = fields
            if tag is None:
                tag = line_tag
            try:
                rank_no = int(rank_field)
                score = float(score_field)
            except ValueError as exc:
                raise ParseError(f"bad rank/score: {exc}", path=str(path), line_no=line_no) from exc

            entries = per_question.setdefault(qid, [])
            if pid_field == NO_ANSWER_SENTINEL:
                if entries or qid in no_answer:
                    raise InvariantViolationError(
                        "entries", f"{path}:{line_no}: {NO_ANSWER_SENTINEL} mixed with other lines for {qid}"
                    )
                if rank_no != 1 or score != 0.0:
                    raise ParseError(
                        f"{NO_ANSWER_SENTINEL} line must have rank 1 and score 0",
                        path=str(path),
                        line_no=line_no,
                    )
                no_answer.add(qid)
                continue
            if qid in no_answer:
                raise InvariantViolationError(
                    "entries", f"{path}:{line_no}: ranked entry after {NO_ANSWER_SENTINEL} for {qid}"
                )
            try:
                pid = parse_passage_id(pid_field)
            except (MalformedIdError, IdRangeError) as exc:
                raise ParseError(str(exc), path=str(path), line_no=line_no) from exc
            if rank_no != len(entries) + 1:
                raise InvariantViolationError(
                    "rank", f"{path}:{line_no}: rank {rank_no} for {qid} is not contiguous (expected {len(entries) + 1})"
                )
            if any(e.passage_id == pid for e in entries):
                raise InvariantViolationError(
                    "passage_id", f"{path}:{line_no}: duplicate passage {pid} for question {qid}"
                )
            if entries and score > entries[-1].score:
                raise InvariantViolationError(
                    "score", f"{path}:{line_no}: score increases down the ranking for {qid}"
                )
            entries.append(RankedEntry(passage_id=pid, score=score, rank=rank_no))

    longest = max((len(v) for v in per_question.values()), default=0)
    return RankedRun(entries=per_question, run_tag=tag or "run", k=max(DEFAULT_K, longest))
