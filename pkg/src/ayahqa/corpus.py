"""Verse-segmented corpus with aligned Arabic and English passage text.

A passage is a contiguous verse range addressed as ``surah:start-end``
(e.g. ``2:30-39``). The corpus is loaded from two TSV files, one per
language, joined on passage id, and is immutable afterwards. Passage text
is stored verbatim: no Unicode normalization, no diacritic stripping.
Normalization is the lexical scorer's private concern.

Corpus TSV format: UTF-8, one ``<passage_id>\\t<text>`` record per line,
no header, ``#`` lines are comments. LF endings on write, CR tolerated on
read.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import (
    AlignmentError,
    DuplicateIdError,
    IdRangeError,
    MalformedIdError,
    ParseError,
    PassageNotFoundError,
)
from .fileio import atomic_write_text

_ID_RE = re.compile(r"^(\d+):(\d+)(?:-(\d+))?$")

SURAH_COUNT = 114


@dataclass(frozen=True)
class PassageId:
    surah: int
    ayah_start: int
    ayah_end: int

    def __post_init__(self):
        if not 1 <= self.surah <= SURAH_COUNT:
            raise IdRangeError(f"surah {self.surah} outside 1..{SURAH_COUNT}")
        if self.ayah_start < 1:
            raise IdRangeError(f"ayah_start {self.ayah_start} must be >= 1")
        if self.ayah_start > self.ayah_end:
            raise IdRangeError(f"ayah_start {self.ayah_start} > ayah_end {self.ayah_end}")

    def __str__(self) -> str:
        return f"{self.surah}:{self.ayah_start}-{self.ayah_end}"


def parse_passage_id(s: str) -> PassageId:
    """Parse ``surah:start-end`` (or ``surah:ayah`` for a single verse).

    ``format(parse(s))`` equals the canonical form of ``s``.
    """
    m = _ID_RE.match(s.strip())
    if not m:
        raise MalformedIdError(f"passage id {s!r} is not of the form surah:start-end")
    surah, start = int(m.group(1)), int(m.group(2))
    end = int(m.group(3)) if m.group(3) is not None else start
    return PassageId(surah, start, end)


@dataclass(frozen=True)
class Passage:
    id: PassageId
    text_ar: str
    text_en: str


class Corpus:
    """Ordered, id-indexed passage collection; iteration follows file order."""

    def __init__(self, passages: list[Passage]):
        self._passages = list(passages)
        self._by_id: dict[PassageId, Passage] = {}
        for p in self._passages:
            if p.id in self._by_id:
                raise DuplicateIdError(f"duplicate passage id {p.id}")
            self._by_id[p.id] = p

    def __iter__(self) -> Iterator[Passage]:
        return iter(self._passages)

    def __len__(self) -> int:
        return len(self._passages)

    def __contains__(self, pid: PassageId) -> bool:
        return pid in self._by_id

    def __getitem__(self, pid: PassageId) -> Passage:
        p = self._by_id.get(pid)
        if p is None:
            raise PassageNotFoundError(f"passage {pid} not in corpus")
        return p

    def get(self, pid: PassageId) -> Passage | None:
        return self._by_id.get(pid)

    def ids(self) -> list[PassageId]:
        return [p.id for p in self._passages]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self._passages == other._passages


def _read_tsv(path: str | Path) -> dict[PassageId, str]:
    """One language's file as an ordered id -> text mapping."""
    records: dict[PassageId, str] = {}
    with open(path, encoding="utf-8", newline="") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(
                    f"expected 2 tab-separated fields, got {len(fields)}",
                    path=str(path),
                    line_no=line_no,
                )
            id_field, text = fields
            try:
                pid = parse_passage_id(id_field)
            except (MalformedIdError, IdRangeError) as exc:
                raise ParseError(str(exc), path=str(path), line_no=line_no) from exc
            if not text.strip():
                raise ParseError(f"empty text for passage {pid}", path=str(path), line_no=line_no)
            if pid in records:
                raise DuplicateIdError(f"{path}:{line_no}: duplicate passage id {pid}")
            records[pid] = text
    return records


def load_corpus(ar_path: str | Path, en_path: str | Path) -> Corpus:
    """Join the Arabic and English TSVs on passage id.

    The Arabic file defines iteration order. An id present in only one
    file raises AlignmentError naming the id.
    """
    ar = _read_tsv(ar_path)
    en = _read_tsv(en_path)
    for pid in ar:
        if pid not in en:
            raise AlignmentError(f"passage {pid} present in {ar_path} but missing from {en_path}")
    for pid in en:
        if pid not in ar:
            raise AlignmentError(f"passage {pid} present in {en_path} but missing from {ar_path}")
    return Corpus([Passage(pid, ar[pid], en[pid]) for pid in ar])


def save_corpus(corpus: Corpus, ar_path: str | Path, en_path: str | Path) -> None:
    ar_lines = "".join(f"{p.id}\t{p.text_ar}\n" for p in corpus)
    en_lines = "".join(f"{p.id}\t{p.text_en}\n" for p in corpus)
    atomic_write_text(ar_path, ar_lines)
    atomic_write_text(en_path, en_lines)
