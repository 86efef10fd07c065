"""Question set and relevance judgments: loading, cleaning, validation, stats.

Questions carry an answerability category that is enforced structurally
against the judgments: a single-answer question has exactly one positive
judgment, a multi-answer question at least two, a zero-answer question
none. Paraphrases reference their parent through ``parent_id`` and always
inherit its split, so paraphrase families never leak across train/dev/test.

Questions JSONL: one object per line with keys ``id``, ``text_ar``,
``text_en`` (nullable), ``qtype`` (single|multi|zero), ``split``
(train|dev|test), ``source`` (original|literature|paraphrase),
``parent_id`` (nullable). Qrels TSV: ``<question_id>\\t0\\t<passage_id>\\t<0|1>``
(the constant second column mirrors standard qrels). Exclusion list: one
question id per line.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .corpus import Corpus, PassageId, parse_passage_id
from .errors import (
    DuplicateJudgmentError,
    EmptyAfterCleaningError,
    IdRangeError,
    InvariantViolationError,
    MalformedIdError,
    ParseError,
)
from .fileio import atomic_write_text


class QType(str, Enum):
    SINGLE = "single"
    MULTI = "multi"
    ZERO = "zero"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class Source(str, Enum):
    ORIGINAL = "original"
    LITERATURE = "literature"
    PARAPHRASE = "paraphrase"


# Upstream bookkeeping of the expanded source question set is internally
# inconsistent; surfaced verbatim by `stats` instead of being reconciled.
EXPANSION_NOTE = (
    "note: upstream expansion figures are inconsistent (629 questions rephrased "
    "twice is reported as 1,895 questions, but 629 x 3 = 1,887); counts above are "
    "computed from the input files and never adjusted toward published totals."
)


@dataclass(frozen=True)
class Question:
    id: str
    text_ar: str
    text_en: str | None
    qtype: QType
    split: Split
    source: Source
    parent_id: str | None = None


@dataclass(frozen=True)
class Judgment:
    question_id: str
    passage_id: PassageId
    relevance: int


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self):
        return iter(self.violations)


@dataclass
class DatasetStats:
    total: int
    by_split: dict[str, int]
    by_qtype: dict[str, int]
    by_source: dict[str, int]
    judgments: int
    positive_judgments: int


_WS_RE = re.compile(r"\s+")
_QMARKS = "?؟"  # ASCII and Arabic question marks


def standardize_text(text: str, lang: str) -> str:
    """Collapse whitespace and end with exactly one question mark.

    The mark is '؟' for Arabic and '?' for English; any existing
    trailing run of either mark is replaced. Idempotent by construction.
    Raises EmptyAfterCleaningError when nothing remains.
    """
    t = _WS_RE.sub(" ", text).strip()
    t = t.rstrip(_QMARKS + " ")
    if not t:
        raise EmptyAfterCleaningError(f"text {text!r} is empty after cleaning")
    mark = "؟" if lang == "ar" else "?"
    return t + mark


def standardize_question(q: Question) -> Question:
    text_ar = standardize_text(q.text_ar, "ar")
    text_en = standardize_text(q.text_en, "en") if q.text_en is not None else None
    return replace(q, text_ar=text_ar, text_en=text_en)


def _enum_value(raw, enum_cls, field: str, path: str, line_no: int):
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ParseError(
            f"{field} {raw!r} not one of: {allowed}", path=path, line_no=line_no
        ) from None


def load_questions(path: str | Path) -> list[Question]:
    """Parse the questions JSONL, enforcing record invariants in file order."""
    questions: list[Question] = []
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line_no=line_no) from exc
            if not isinstance(obj, dict):
                raise ParseError("record is not a JSON object", path=str(path), line_no=line_no)
            for key in ("id", "text_ar", "qtype", "split", "source"):
                if key not in obj:
                    raise ParseError(f"missing key {key!r}", path=str(path), line_no=line_no)
            qid = obj["id"]
            if not isinstance(qid, str) or not qid or any(ch.isspace() for ch in qid):
                raise InvariantViolationError("id", f"line {line_no}: id must be a whitespace-free token, got {qid!r}")
            text_ar = obj["text_ar"]
            if not isinstance(text_ar, str) or not text_ar.strip():
                raise InvariantViolationError("text_ar", f"line {line_no}: question {qid}: text_ar must be non-empty")
            text_en = obj.get("text_en")
            if text_en is not None and not isinstance(text_en, str):
                raise ParseError("text_en must be a string or null", path=str(path), line_no=line_no)
            q = Question(
                id=qid,
                text_ar=text_ar,
                text_en=text_en,
                qtype=_enum_value(obj["qtype"], QType, "qtype", str(path), line_no),
                split=_enum_value(obj["split"], Split, "split", str(path), line_no),
                source=_enum_value(obj["source"], Source, "source", str(path), line_no),
                parent_id=obj.get("parent_id"),
            )
            if (q.source == Source.PARAPHRASE) != (q.parent_id is not None):
                raise InvariantViolationError(
                    "parent_id",
                    f"line {line_no}: question {qid}: parent_id must be present iff source is paraphrase",
                )
            questions.append(q)

    by_id: dict[str, Question] = {}
    for q in questions:
        if q.id in by_id:
            raise InvariantViolationError("id", f"duplicate question id {q.id}")
        by_id[q.id] = q
    for q in questions:
        if q.parent_id is not None:
            parent = by_id.get(q.parent_id)
            if parent is None:
                raise InvariantViolationError(
                    "parent_id", f"question {q.id}: parent {q.parent_id} does not exist"
                )
            if parent.source == Source.PARAPHRASE:
                raise InvariantViolationError(
                    "parent_id", f"question {q.id}: parent {q.parent_id} is itself a paraphrase"
                )
    return questions


def save_questions(questions: list[Question], path: str | Path) -> None:
    lines = []
    for q in questions:
        lines.append(
            json.dumps(
                {
                    "id": q.id,
                    "text_ar": q.text_ar,
                    "text_en": q.text_en,
                    "qtype": q.qtype.value,
                    "split": q.split.value,
                    "source": q.source.value,
                    "parent_id": q.parent_id,
                },
                ensure_ascii=False,
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_judgments(path: str | Path) -> list[Judgment]:
    """Parse a qrels TSV; duplicate (question, passage) pairs are rejected."""
    judgments: list[Judgment] = []
    seen: set[tuple[str, PassageId]] = set()
    with open(path, encoding="utf-8", newline="") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ParseError(
                    f"expected 4 tab-separated fields, got {len(fields)}",
                    path=str(path),
                    line_no=line_no,
                )
            qid, _, pid_field, rel_field = fields
            try:
                pid = parse_passage_id(pid_field)
            except (MalformedIdError, IdRangeError) as exc:
                raise ParseError(str(exc), path=str(path), line_no=line_no) from exc
            if rel_field not in ("0", "1"):
                raise ParseError(
                    f"relevance {rel_field!r} not allowed (only 0 or 1)",
                    path=str(path),
                    line_no=line_no,
                )
            key = (qid, pid)
            if key in seen:
                raise DuplicateJudgmentError(f"{path}:{line_no}: duplicate judgment for ({qid}, {pid})")
            seen.add(key)
            judgments.append(Judgment(qid, pid, int(rel_field)))
    return judgments


def save_judgments(judgments: list[Judgment], path: str | Path) -> None:
    atomic_write_text(
        path, "".join(f"{j.question_id}\t0\t{j.passage_id}\t{j.relevance}\n" for j in judgments)
    )


def load_exclusions(path: str | Path) -> set[str]:
    excluded: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if line and not line.startswith("#"):
                excluded.add(line)
    return excluded


def validate_dataset(
    questions: list[Question], judgments: list[Judgment], corpus: Corpus
) -> ValidationReport:
    """Integrity check; violations are data to report, never exceptions."""
    violations: list[Violation] = []
    by_id = {q.id: q for q in questions}
    positives: Counter[str] = Counter()

    for j in judgments:
        if j.question_id not in by_id:
            violations.append(
                Violation("unknown-question", f"judgment references unknown question {j.question_id}")
            )
        if j.passage_id not in corpus:
            violations.append(
                Violation("unknown-passage", f"judgment on {j.question_id} references unknown passage {j.passage_id}")
            )
        if j.relevance == 1:
            positives[j.question_id] += 1

    for q in questions:
        n_pos = positives.get(q.id, 0)
        if q.qtype == QType.ZERO and n_pos > 0:
            violations.append(
                Violation("zero-answer-has-positive", f"zero-answer question {q.id} has {n_pos} positive judgment(s)")
            )
        elif q.qtype == QType.SINGLE and n_pos != 1:
            violations.append(
                Violation("single-answer-positive-count", f"single-answer question {q.id} has {n_pos} positives (expected 1)")
            )
        elif q.qtype == QType.MULTI and n_pos < 2:
            violations.append(
                Violation("multi-answer-positive-count", f"multi-answer question {q.id} has {n_pos} positives (expected >= 2)")
            )
    return ValidationReport(violations)


def drop_questions(
    questions: list[Question], judgments: list[Judgment], ids: set[str]
) -> tuple[list[Question], list[Judgment], list[str]]:
    """Remove the given ids, their paraphrases, and all affected judgments."""
    dropped = set(ids)
    dropped.update(q.id for q in questions if q.parent_id in dropped)
    kept_q = [q for q in questions if q.id not in dropped]
    kept_j = [j for j in judgments if j.question_id not in dropped]
    dropped_present = [q.id for q in questions if q.id in dropped]
    return kept_q, kept_j, dropped_present


def compute_stats(questions: list[Question], judgments: list[Judgment]) -> DatasetStats:
    by_split = Counter(q.split.value for q in questions)
    by_qtype = Counter(q.qtype.value for q in questions)
    by_source = Counter(q.source.value for q in questions)
    return DatasetStats(
        total=len(questions),
        by_split={s.value: by_split.get(s.value, 0) for s in Split},
        by_qtype={t.value: by_qtype.get(t.value, 0) for t in QType},
        by_source={s.value: by_source.get(s.value, 0) for s in Source},
        judgments=len(judgments),
        positive_judgments=sum(1 for j in judgments if j.relevance == 1),
    )
