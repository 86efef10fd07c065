"""Cross-lingual dataset expansion through pluggable providers.

Translation and paraphrase backends live behind two tiny contracts so the
pipeline is never married to a specific service: the bundled echo provider
keeps tests hermetic, and the remote provider client speaks a small HTTP
protocol (POST /translate, POST /paraphrase) to whatever service is
configured. Every provider call is memoized in an append-only JSONL cache
keyed by (provider_id, src, tgt, SHA-256 of the input text), so warm-cache
runs are pure functions of their inputs and batch jobs restart cheaply.

Provider calls are retried 3 times with exponential backoff, then fail
hard. Paraphrasing happens in the source language; translating the new
variants is the caller's (CLI's) next step.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .dataset import Judgment, Question, Source, standardize_text
from .errors import DuplicateParaphraseError, InvariantViolationError, ProviderError

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.2
DEFAULT_WORKERS = 4


class TranslationProvider(Protocol):
    provider_id: str

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        ...


class ParaphraseProvider(Protocol):
    provider_id: str

    def paraphrase(self, text: str, lang: str, n: int) -> list[str]:
        ...


class EchoProvider:
    """Deterministic test double: tags instead of translating.

    translate("x", "ar", "en") == "[en]x"; paraphrases append a variant
    index. Implements both provider contracts.
    """

    provider_id = "echo"

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        if not text:
            raise ProviderError("cannot translate empty text")
        return f"[{tgt_lang}]{text}"

    def paraphrase(self, text: str, lang: str, n: int) -> list[str]:
        if not text:
            raise ProviderError("cannot paraphrase empty text")
        return [f"{text} ({k})" for k in range(1, n + 1)]


class RemoteProvider:
    """HTTP client for an external translation/paraphrase service.

    POST <endpoint>/translate   {"text":..., "src":..., "tgt":...} -> {"output":...}
    POST <endpoint>/paraphrase  {"text":..., "lang":..., "n":...}  -> {"outputs":[...]}

    Any non-200 response or transport failure raises ProviderError; the
    calling operation owns retries.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        api_key: str | None = None,
        provider_id: str = "remote",
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.provider_id = provider_id
        self.timeout = timeout

    def _post(self, route: str, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                self.endpoint + route,
                data=json.dumps(payload, ensure_ascii=False).encode("utf-8"),
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"provider unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"provider returned HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(f"provider returned invalid JSON: {exc}") from exc

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        body = self._post("/translate", {"text": text, "src": src_lang, "tgt": tgt_lang})
        output = body.get("output")
        if not isinstance(output, str) or not output:
            raise ProviderError("provider returned empty translation")
        return output

    def paraphrase(self, text: str, lang: str, n: int) -> list[str]:
        body = self._post("/paraphrase", {"text": text, "lang": lang, "n": n})
        outputs = body.get("outputs")
        if not isinstance(outputs, list) or len(outputs) != n or not all(
            isinstance(o, str) and o for o in outputs
        ):
            raise ProviderError(f"provider did not return {n} paraphrases")
        return outputs


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class TranslationCache:
    """Append-only JSONL memoization of provider outputs.

    Each line holds provider_id, src, tgt, digest (lowercase hex SHA-256 of
    the UTF-8 input text) and output. On duplicate keys the last line wins.
    Pass path=None for a purely in-memory cache.
    """

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str, str, str], str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    key = (obj["provider_id"], obj["src"], obj["tgt"], obj["digest"])
                    self._entries[key] = obj["output"]

    def get(self, provider_id: str, src: str, tgt: str, text: str) -> str | None:
        return self._entries.get((provider_id, src, tgt, text_digest(text)))

    def put(self, provider_id: str, src: str, tgt: str, text: str, output: str) -> None:
        digest = text_digest(text)
        record = {
            "provider_id": provider_id,
            "src": src,
            "tgt": tgt,
            "digest": digest,
            "output": output,
        }
        with self._lock:
            self._entries[(provider_id, src, tgt, digest)] = output
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8", newline="") as f:
                    f.write(json.dumps(record, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


def _call_with_retries(fn: Callable[[], object], what: str, retries: int, backoff: float):
    last: Exception | None = None
    for attempt in range(retries):
        try:
            return fn()
        except ProviderError as exc:
            last = exc
            if attempt + 1 < retries:
                time.sleep(backoff * 2**attempt)
    raise ProviderError(f"{what} failed after {retries} attempts: {last}")


def translate_questions(
    questions: Sequence[Question],
    provider: TranslationProvider,
    cache: TranslationCache,
    *,
    src: str = "ar",
    tgt: str = "en",
    workers: int = DEFAULT_WORKERS,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
) -> list[Question]:
    """Fill text_en for every question that lacks it; others pass through.

    Cached texts never re-invoke the provider; identical uncached texts are
    fetched once. Uncached texts are fetched with bounded parallelism, and
    results are assembled in input order regardless of completion order.
    """
    pending: dict[str, str] = {}  # text -> first question id needing it
    for q in questions:
        if q.text_en is None and cache.get(provider.provider_id, src, tgt, q.text_ar) is None:
            pending.setdefault(q.text_ar, q.id)

    def fetch(item: tuple[str, str]) -> tuple[str, str]:
        text, qid = item
        out = _call_with_retries(
            lambda: provider.translate(text, src, tgt),
            f"translate question {qid}",
            retries,
            backoff,
        )
        return text, out

    if pending:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for text, out in pool.map(fetch, list(pending.items())):
                cache.put(provider.provider_id, src, tgt, text, out)

    result: list[Question] = []
    for q in questions:
        if q.text_en is not None:
            result.append(q)
            continue
        out = cache.get(provider.provider_id, src, tgt, q.text_ar)
        if out is None:  # fetch failed without raising; should not happen
            raise ProviderError(f"no translation produced for question {q.id}")
        result.append(replace(q, text_en=out))
    return result


def back_translate(
    text_en: str,
    provider: TranslationProvider,
    cache: TranslationCache,
    *,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
) -> str:
    """Arabic rendering of retrieved English text, for presentation."""
    if not text_en:
        raise ValueError("back_translate requires non-empty English text")
    cached = cache.get(provider.provider_id, "en", "ar", text_en)
    if cached is not None:
        return cached
    out = _call_with_retries(
        lambda: provider.translate(text_en, "en", "ar"),
        f"back-translate {text_en[:40]!r}",
        retries,
        backoff,
    )
    cache.put(provider.provider_id, "en", "ar", text_en, out)
    return out


def _paraphrase_tgt(lang: str, k: int, n: int) -> str:
    # Cache tgt tag for variant k of n; keeps cache entries single-string.
    return f"{lang}~p{k}/{n}"


def paraphrase_and_expand(
    questions: Sequence[Question],
    judgments: Sequence[Judgment],
    provider: ParaphraseProvider,
    n: int,
    cache: TranslationCache,
    *,
    lang: str = "ar",
    workers: int = DEFAULT_WORKERS,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
) -> tuple[list[Question], list[Judgment]]:
    """Add n paraphrases per question, replicating the parent's judgments.

    Paraphrase k of question q gets id ``{q.id}#p{k}``, source=paraphrase,
    parent_id=q.id, and inherits split and qtype. Its text is the
    standardized provider output; outputs that collide with each other or
    with the input (after standardization) are rejected. English text is
    left unfilled; translate the expanded set afterwards.
    """
    if n < 1:
        raise ValueError(f"paraphrase count must be >= 1, got {n}")
    for q in questions:
        if q.source == Source.PARAPHRASE:
            raise InvariantViolationError(
                "source", f"question {q.id} is already a paraphrase; expand original questions only"
            )

    def cached_variants(text: str) -> list[str] | None:
        variants = []
        for k in range(1, n + 1):
            out = cache.get(provider.provider_id, lang, _paraphrase_tgt(lang, k, n), text)
            if out is None:
                return None
            variants.append(out)
        return variants

    pending: dict[str, str] = {}  # text -> first question id needing it
    for q in questions:
        if cached_variants(q.text_ar) is None:
            pending.setdefault(q.text_ar, q.id)

    def fetch(item: tuple[str, str]) -> tuple[str, list[str]]:
        text, qid = item
        outs = _call_with_retries(
            lambda: provider.paraphrase(text, lang, n),
            f"paraphrase question {qid}",
            retries,
            backoff,
        )
        return text, list(outs)

    if pending:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for text, outs in pool.map(fetch, list(pending.items())):
                for k, out in enumerate(outs, start=1):
                    cache.put(provider.provider_id, lang, _paraphrase_tgt(lang, k, n), text, out)

    judgments_by_q: dict[str, list[Judgment]] = {}
    for j in judgments:
        judgments_by_q.setdefault(j.question_id, []).append(j)

    out_questions: list[Question] = []
    out_judgments: list[Judgment] = list(judgments)
    for q in questions:
        out_questions.append(q)
        variants = cached_variants(q.text_ar)
        if variants is None:
            raise ProviderError(f"no paraphrases produced for question {q.id}")
        seen = {standardize_text(q.text_ar, lang)}
        for k, raw in enumerate(variants, start=1):
            text = standardize_text(raw, lang)
            if text in seen:
                raise DuplicateParaphraseError(
                    f"provider returned duplicate paraphrase for question {q.id}: {text!r}"
                )
            seen.add(text)
            pid = f"{q.id}#p{k}"
            out_questions.append(
                Question(
                    id=pid,
                    text_ar=text,
                    text_en=None,
                    qtype=q.qtype,
                    split=q.split,
                    source=Source.PARAPHRASE,
                    parent_id=q.id,
                )
            )
            for j in judgments_by_q.get(q.id, []):
                out_judgments.append(Judgment(pid, j.passage_id, j.relevance))
    return out_questions, out_judgments


def dedupe_questions(questions: Sequence[Question]) -> tuple[list[Question], list[str]]:
    """Drop questions whose standardized Arabic text repeats an earlier one."""
    seen: set[str] = set()
    kept: list[Question] = []
    dropped: list[str] = []
    for q in questions:
        key = standardize_text(q.text_ar, "ar")
        if key in seen:
            dropped.append(q.id)
        else:
            seen.add(key)
            kept.append(q)
    return kept, dropped
