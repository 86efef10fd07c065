"""Pluggable relevance scoring: lexical BM25, remote cross-encoder, fixtures.

Every scorer maps (question text, passage texts) to one finite real score
per passage, positionally aligned, higher meaning more relevant. The BM25
scorer is the deterministic baseline used for hermetic tests and hard
negative mining; the remote scorer talks to an out-of-process cross-encoder
over HTTP; the fixture scorer replays scores recorded in a run file.

BM25 uses the IDF form ln((N - df + 0.5) / (df + 0.5) + 1) and the usual
term-frequency saturation tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)),
summed over query tokens as given (a token occurring twice in the query
contributes twice). Tokenization is deliberately naive - Unicode lowercase,
split on every non-alphanumeric codepoint - and is private to this module;
the corpus keeps verbatim text.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol, Sequence

import requests

from .errors import FixtureMissingQuestionError, ProtocolError, TransportError

if TYPE_CHECKING:
    from .corpus import Corpus, Passage, PassageId
    from .dataset import Question
    from .retrieval import RankedRun

FIXTURE_MISSING_SCORE = -1e9
MAX_PASSAGES_PER_REQUEST = 128


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric codepoint."""
    tokens: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class CorpusStats:
    """Document frequencies and average token length over the English corpus."""

    n_docs: int
    avg_len: float
    df: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "CorpusStats":
        df: dict[str, int] = {}
        total_len = 0
        for text in texts:
            toks = tokenize(text)
            total_len += len(toks)
            for t in set(toks):
                df[t] = df.get(t, 0) + 1
        n = len(texts)
        return cls(n_docs=n, avg_len=(total_len / n) if n else 0.0, df=df)


def bm25_score_batch(
    question_text: str,
    passage_texts: Sequence[str],
    params: Bm25Params,
    corpus_stats: CorpusStats,
) -> list[float]:
    q_tokens = tokenize(question_text)
    scores: list[float] = []
    for text in passage_texts:
        tf = Counter(tokenize(text))
        dl = sum(tf.values())
        if corpus_stats.avg_len > 0:
            norm = params.k1 * (1 - params.b + params.b * dl / corpus_stats.avg_len)
        else:
            norm = params.k1
        s = 0.0
        for t in q_tokens:
            f = tf.get(t, 0)
            if f == 0:
                continue
            df = corpus_stats.df.get(t, 0)
            idf = math.log((corpus_stats.n_docs - df + 0.5) / (df + 0.5) + 1)
            s += idf * f * (params.k1 + 1) / (f + norm)
        scores.append(s)
    return scores


class Scorer(Protocol):
    """What the retriever plugs in: a named, aligned batch scorer."""

    name: str
    needs_text: bool

    def score(self, question: "Question", passages: Sequence["Passage"]) -> list[float]:
        ...


class Bm25Scorer:
    """Deterministic lexical scorer over the corpus English text."""

    name = "lexical"
    needs_text = True

    def __init__(self, params: Bm25Params | None = None):
        self.params = params or Bm25Params()
        self.stats: CorpusStats | None = None

    def fit(self, corpus: "Corpus") -> "Bm25Scorer":
        self.stats = CorpusStats.from_texts([p.text_en for p in corpus])
        return self

    def score_texts(self, question_text: str, passage_texts: Sequence[str]) -> list[float]:
        if self.stats is None:
            raise ValueError("Bm25Scorer must be fitted to a corpus before scoring")
        return bm25_score_batch(question_text, passage_texts, self.params, self.stats)

    def score(self, question: "Question", passages: Sequence["Passage"]) -> list[float]:
        return self.score_texts(question.text_en or "", [p.text_en for p in passages])


def remote_score_batch(
    question_text: str,
    passage_texts: Sequence[str],
    endpoint: str,
    *,
    api_key: str | None = None,
    max_batch: int = MAX_PASSAGES_PER_REQUEST,
    retries: int = 3,
    backoff: float = 0.2,
    timeout: float = 60.0,
    in_flight: int = 2,
) -> list[float]:
    """Score through the sidecar wire protocol, splitting large batches.

    Batches above ``max_batch`` passages are split into consecutive
    requests and reassembled in order. Transport failures are retried
    ``retries`` times with exponential backoff, then raise TransportError.
    A response whose score list does not match the request length, or that
    contains a non-finite value, raises ProtocolError immediately - it is
    never padded or truncated.
    """
    if not passage_texts:
        return []
    url = endpoint.rstrip("/") + "/score"
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    chunks = [
        list(passage_texts[i : i + max_batch]) for i in range(0, len(passage_texts), max_batch)
    ]

    def fetch(chunk: list[str]) -> list[float]:
        payload = json.dumps({"question": question_text, "passages": chunk}, ensure_ascii=False)
        last_error: Exception | None = None
        for attempt in range(retries):
            if attempt:
                time.sleep(backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    url, data=payload.encode("utf-8"), headers=headers, timeout=timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code != 200:
                last_error = TransportError(f"scoring endpoint returned HTTP {resp.status_code}")
                continue
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"scoring endpoint returned invalid JSON: {exc}") from exc
            scores = body.get("scores") if isinstance(body, dict) else None
            if not isinstance(scores, list):
                raise ProtocolError("scoring response missing 'scores' list")
            if len(scores) != len(chunk):
                raise ProtocolError(
                    f"scoring endpoint returned {len(scores)} scores for {len(chunk)} passages"
                )
            out = []
            for s in scores:
                v = float(s)
                if not math.isfinite(v):
                    raise ProtocolError(f"scoring endpoint returned non-finite score {s!r}")
                out.append(v)
            return out
        raise TransportError(f"scoring endpoint failed after {retries} attempts: {last_error}")

    if len(chunks) == 1:
        return fetch(chunks[0])
    with ThreadPoolExecutor(max_workers=max(1, in_flight)) as pool:
        results = list(pool.map(fetch, chunks))
    return [s for chunk_scores in results for s in chunk_scores]


class RemoteScorer:
    """Client for the out-of-process cross-encoder service."""

    name = "remote"
    needs_text = True

    def __init__(
        self,
        endpoint: str,
        *,
        api_key: str | None = None,
        retries: int = 3,
        backoff: float = 0.2,
        timeout: float = 60.0,
        in_flight: int = 2,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.in_flight = in_flight

    def score_texts(self, question_text: str, passage_texts: Sequence[str]) -> list[float]:
        return remote_score_batch(
            question_text,
            passage_texts,
            self.endpoint,
            api_key=self.api_key,
            retries=self.retries,
            backoff=self.backoff,
            timeout=self.timeout,
            in_flight=self.in_flight,
        )

    def score(self, question: "Question", passages: Sequence["Passage"]) -> list[float]:
        return self.score_texts(question.text_en or "", [p.text_en for p in passages])

    def health(self) -> dict:
        resp = requests.get(self.endpoint.rstrip("/") + "/health", timeout=self.timeout)
        if resp.status_code != 200:
            raise TransportError(f"health check returned HTTP {resp.status_code}")
        return resp.json()


class FixtureScorer:
    """Replays recorded (question, passage) scores from a run file.

    Passages absent from the recording score the -1e9 sentinel so they sink
    to the bottom of any ranking; a question absent from the recording is a
    hard error.
    """

    name = "fixture"
    needs_text = False

    def __init__(self, scores: dict[str, dict["PassageId", float]]):
        self._scores = scores

    @classmethod
    def from_run(cls, run: "RankedRun") -> "FixtureScorer":
        return cls(
            {
                qid: {e.passage_id: e.score for e in entries}
                for qid, entries in run.entries.items()
            }
        )

    @classmethod
    def from_file(cls, path) -> "FixtureScorer":
        from .retrieval import read_run

        return cls.from_run(read_run(path))

    def score_ids(self, question_id: str, passage_ids: Sequence["PassageId"]) -> list[float]:
        recorded = self._scores.get(question_id)
        if recorded is None:
            raise FixtureMissingQuestionError(f"no recorded scores for question {question_id}")
        return [recorded.get(pid, FIXTURE_MISSING_SCORE) for pid in passage_ids]

    def score(self, question: "Question", passages: Sequence["Passage"]) -> list[float]:
        return self.score_ids(question.id, [p.id for p in passages])


def fixture_score_batch(
    question_id: str, passage_ids: Sequence["PassageId"], fixture: FixtureScorer
) -> list[float]:
    return fixture.score_ids(question_id, passage_ids)
