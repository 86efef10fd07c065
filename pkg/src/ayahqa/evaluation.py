"""Ranking metrics (MAP@10, MRR, Recall@5/10, Precision@5/10) and run comparison.

Definitions, over a ranked list of passage ids and the set of relevant ids:

* P@k   = |top-k intersect relevant| / k  (denominator stays k for short lists)
* R@k   = |top-k intersect relevant| / |relevant|
* AP@10 = sum over ranks i <= 10 of rel(i) * P@i, divided by |relevant|.
  The denominator is the full relevant count, so a question with more than
  10 relevant passages cannot reach 1.0.
* RR@10 = 1/r for the first relevant rank r <= 10, else 0. MRR uses the
  same cutoff 10 as MAP, matching the run depth.

Zero-answer questions are scored all-or-nothing: every metric is 1.0 when
the prediction is empty and 0.0 otherwise. Aggregates are plain arithmetic
means over every evaluated question (answerable and zero-answer alike),
summed in ascending question-id order. Unjudged passages count as
irrelevant; qrels are binary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .dataset import Judgment, QType, Question
from .errors import QuestionSetMismatchError, UnknownQuestionError, ZeroRelevantError
from .retrieval import RankedRun

METRIC_NAMES = ("map10", "mrr", "rec5", "rec10", "pre5", "pre10")
METRIC_LABELS = {
    "map10": "MAP10",
    "mrr": "MRR",
    "rec5": "Rec5",
    "rec10": "Rec10",
    "pre5": "Pre5",
    "pre10": "Pre10",
}


@dataclass(frozen=True)
class EvalConfig:
    cutoffs: tuple[int, int] = (5, 10)
    map_cutoff: int = 10
    rr_cutoff: int = 10
    zero_answer_policy: str = "all-or-nothing"

    def __post_init__(self):
        if any(c < 1 for c in self.cutoffs) or self.map_cutoff < 1 or self.rr_cutoff < 1:
            raise ValueError("cutoffs must be positive")
        if self.zero_answer_policy != "all-or-nothing":
            raise ValueError(f"unsupported zero-answer policy {self.zero_answer_policy!r}")


def precision_at_k(ranked: Sequence[Hashable], relevant: set, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for pid in ranked[:k] if pid in relevant)
    return hits / k


def recall_at_k(ranked: Sequence[Hashable], relevant: set, k: int) -> float:
    if not relevant:
        raise ZeroRelevantError("recall undefined with no relevant passages")
    hits = sum(1 for pid in ranked[:k] if pid in relevant)
    return hits / len(relevant)


def average_precision_at_k(ranked: Sequence[Hashable], relevant: set, k: int = 10) -> float:
    if not relevant:
        raise ZeroRelevantError("average precision undefined with no relevant passages")
    hits = 0
    total = 0.0
    for i, pid in enumerate(ranked[:k], start=1):
        if pid in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def reciprocal_rank_at_k(ranked: Sequence[Hashable], relevant: set, k: int = 10) -> float:
    if not relevant:
        raise ZeroRelevantError("reciprocal rank undefined with no relevant passages")
    for i, pid in enumerate(ranked[:k], start=1):
        if pid in relevant:
            return 1.0 / i
    return 0.0


@dataclass(frozen=True)
class MetricValues:
    map10: float
    mrr: float
    rec5: float
    rec10: float
    pre5: float
    pre10: float

    def get(self, name: str) -> float:
        return getattr(self, name)

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class MetricReport:
    run_tag: str
    question_count: int
    zero_answer_count: int
    per_question: dict[str, MetricValues]
    aggregates: MetricValues
    config: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return {
            "run_tag": self.run_tag,
            "question_count": self.question_count,
            "zero_answer_count": self.zero_answer_count,
            "config": {
                "cutoffs": list(self.config.cutoffs),
                "map_cutoff": self.config.map_cutoff,
                "rr_cutoff": self.config.rr_cutoff,
                "zero_answer_policy": self.config.zero_answer_policy,
            },
            "aggregates": self.aggregates.to_dict(),
            "per_question": {qid: m.to_dict() for qid, m in sorted(self.per_question.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"


def evaluate(
    run: RankedRun,
    judgments: Sequence[Judgment],
    questions: Sequence[Question],
    config: EvalConfig | None = None,
) -> MetricReport:
    """Score a run against qrels over every question in the run or the qrels.

    Questions judged in the qrels but missing from the run count as empty
    predictions. A run (or qrels) question id absent from the dataset is an
    error, as is an answerable question with no positive judgments.
    """
    config = config or EvalConfig()
    by_id = {q.id: q for q in questions}
    relevant: dict[str, set] = {}
    for j in judgments:
        if j.question_id not in by_id:
            raise UnknownQuestionError(f"qrels reference unknown question {j.question_id}")
        if j.relevance == 1:
            relevant.setdefault(j.question_id, set()).add(j.passage_id)
    for qid in run.entries:
        if qid not in by_id:
            raise UnknownQuestionError(f"run contains unknown question {qid}")

    evaluated = sorted(set(run.entries) | {j.question_id for j in judgments})
    per_question: dict[str, MetricValues] = {}
    zero_answer_count = 0
    c5, c10 = config.cutoffs

    for qid in evaluated:
        q = by_id[qid]
        predicted = [e.passage_id for e in run.entries.get(qid, [])]
        if q.qtype == QType.ZERO:
            zero_answer_count += 1
            value = 1.0 if not predicted else 0.0
            per_question[qid] = MetricValues(value, value, value, value, value, value)
            continue
        rel = relevant.get(qid, set())
        if not rel:
            raise ZeroRelevantError(
                f"answerable question {qid} has no positive judgments; validate the dataset"
            )
        per_question[qid] = MetricValues(
            map10=average_precision_at_k(predicted, rel, config.map_cutoff),
            mrr=reciprocal_rank_at_k(predicted, rel, config.rr_cutoff),
            rec5=recall_at_k(predicted, rel, c5),
            rec10=recall_at_k(predicted, rel, c10),
            pre5=precision_at_k(predicted, rel, c5),
            pre10=precision_at_k(predicted, rel, c10),
        )

    n = len(evaluated)
    if n:
        means = {
            name: sum(per_question[qid].get(name) for qid in evaluated) / n
            for name in METRIC_NAMES
        }
    else:
        means = {name: 0.0 for name in METRIC_NAMES}
    return MetricReport(
        run_tag=run.run_tag,
        question_count=n,
        zero_answer_count=zero_answer_count,
        per_question=per_question,
        aggregates=MetricValues(**means),
        config=config,
    )


@dataclass
class RunComparison:
    base_tag: str
    ours_tag: str
    question_count: int
    rows: list[tuple[str, float, float]]  # (metric, base, ours)

    def to_dict(self) -> dict:
        return {
            "base_tag": self.base_tag,
            "ours_tag": self.ours_tag,
            "question_count": self.question_count,
            "metrics": {
                name: {
                    "base": base,
                    "ours": ours,
                    "delta": ours - base,
                    "winner": "ours" if ours > base else ("base" if base > ours else "tie"),
                }
                for name, base, ours in self.rows
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"


def compare_runs(base_report: MetricReport, ours_report: MetricReport) -> RunComparison:
    """Base-vs-Ours comparison over the same question set."""
    if set(base_report.per_question) != set(ours_report.per_question):
        raise QuestionSetMismatchError(
            "reports cover different question sets; compare runs over the same questions"
        )
    rows = [
        (name, base_report.aggregates.get(name), ours_report.aggregates.get(name))
        for name in METRIC_NAMES
    ]
    return RunComparison(
        base_tag=base_report.run_tag,
        ours_tag=ours_report.run_tag,
        question_count=base_report.question_count,
        rows=rows,
    )


def report_table(report: MetricReport) -> str:
    """Aligned aggregate table for one run."""
    lines = [f"run: {report.run_tag}"]
    lines.append(
        f"questions: {report.question_count} (zero-answer: {report.zero_answer_count})"
    )
    header = "  ".join(f"{METRIC_LABELS[name]:>6}" for name in METRIC_NAMES)
    values = "  ".join(f"{report.aggregates.get(name):6.4f}" for name in METRIC_NAMES)
    lines.append(header)
    lines.append(values)
    return "\n".join(lines) + "\n"


def comparison_table(cmp: RunComparison) -> str:
    """Base-vs-Ours table; the strictly larger value in each pair is bolded."""
    rows = []
    for name, base, ours in cmp.rows:
        base_s, ours_s = f"{base:.2f}", f"{ours:.2f}"
        if ours > base:
            ours_s = f"**{ours_s}**"
        elif base > ours:
            base_s = f"**{base_s}**"
        rows.append((METRIC_LABELS[name], base_s, ours_s, f"{ours - base:+.2f}"))
    headers = ("Metric", f"Base ({cmp.base_tag})", f"Ours ({cmp.ours_tag})", "Delta")
    widths = [
        max(len(headers[i]), max(len(r[i]) for r in rows)) for i in range(4)
    ]
    out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    out.append("  ".join("-" * w for w in widths))
    for r in rows:
        out.append("  ".join(r[i].ljust(widths[i]) for i in range(4)))
    return "\n".join(out) + "\n"
