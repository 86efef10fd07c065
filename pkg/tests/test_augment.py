import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ayahqa.augment import (
    EchoProvider,
    RemoteProvider,
    TranslationCache,
    back_translate,
    dedupe_questions,
    paraphrase_and_expand,
    translate_questions,
)
from ayahqa.corpus import PassageId
from ayahqa.dataset import Judgment, QType, Question, Source, Split
from ayahqa.errors import (
    DuplicateParaphraseError,
    InvariantViolationError,
    ProviderError,
)


def question(qid, text_ar="من هو موسى؟", text_en=None, split=Split.TRAIN,
             qtype=QType.SINGLE, source=Source.ORIGINAL, parent_id=None):
    return Question(qid, text_ar, text_en, qtype, split, source, parent_id)


class CountingProvider:
    """Echo provider that counts calls, for cache contract tests."""

    provider_id = "echo"

    def __init__(self):
        self.translate_calls = 0
        self.paraphrase_calls = 0
        self._echo = EchoProvider()

    def translate(self, text, src_lang, tgt_lang):
        self.translate_calls += 1
        return self._echo.translate(text, src_lang, tgt_lang)

    def paraphrase(self, text, lang, n):
        self.paraphrase_calls += 1
        return self._echo.paraphrase(text, lang, n)


class FlakyProvider:
    provider_id = "flaky"

    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def translate(self, text, src_lang, tgt_lang):
        self.calls += 1
        if self.calls <= self.failures:
            raise ProviderError("transient failure")
        return f"[{tgt_lang}]{text}"


class TestTranslateQuestions:
    def test_echo_provider_fills_missing(self):
        cache = TranslationCache(None)
        out = translate_questions([question("q1")], EchoProvider(), cache)
        assert out[0].text_en == "[en]من هو موسى؟"

    def test_existing_text_untouched_no_calls(self):
        provider = CountingProvider()
        cache = TranslationCache(None)
        q = question("q1", text_en="Who is Moses?")
        out = translate_questions([q], provider, cache)
        assert out == [q]
        assert provider.translate_calls == 0

    def test_second_invocation_hits_cache(self, tmp_path):
        provider = CountingProvider()
        cache_path = tmp_path / "cache.jsonl"
        qs = [question("q1"), question("q2", text_ar="أين ولد عيسى؟")]
        translate_questions(qs, provider, TranslationCache(cache_path))
        assert provider.translate_calls == 2
        out = translate_questions(qs, provider, TranslationCache(cache_path))
        assert provider.translate_calls == 2
        assert out[0].text_en == "[en]من هو موسى؟"

    def test_identical_texts_deduplicate_calls(self):
        provider = CountingProvider()
        qs = [question("q1"), question("q2")]  # same text_ar
        translate_questions(qs, provider, TranslationCache(None))
        assert provider.translate_calls == 1

    def test_retries_then_succeeds(self):
        provider = FlakyProvider(failures=2)
        out = translate_questions([question("q1")], provider, TranslationCache(None), backoff=0.0)
        assert out[0].text_en == "[en]من هو موسى؟"
        assert provider.calls == 3

    def test_fails_after_bounded_retries_naming_question(self):
        provider = FlakyProvider(failures=10)
        with pytest.raises(ProviderError, match="q1"):
            translate_questions([question("q1")], provider, TranslationCache(None), backoff=0.0)
        assert provider.calls == 3

    def test_parallel_matches_sequential(self):
        qs = [question(f"q{i}", text_ar=f"سؤال رقم {i}؟") for i in range(20)]
        seq = translate_questions(qs, EchoProvider(), TranslationCache(None), workers=1)
        par = translate_questions(qs, EchoProvider(), TranslationCache(None), workers=8)
        assert seq == par


class TestBackTranslate:
    def test_echo(self):
        cache = TranslationCache(None)
        assert back_translate("In the name of Allah", EchoProvider(), cache) == "[ar]In the name of Allah"

    def test_cached_zero_calls(self):
        provider = CountingProvider()
        cache = TranslationCache(None)
        first = back_translate("text", provider, cache)
        second = back_translate("text", provider, cache)
        assert first == second
        assert provider.translate_calls == 1

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            back_translate("", EchoProvider(), TranslationCache(None))


class TestCache:
    def test_last_entry_wins(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        c = TranslationCache(path)
        c.put("echo", "ar", "en", "نص", "old")
        c.put("echo", "ar", "en", "نص", "new")
        reloaded = TranslationCache(path)
        assert reloaded.get("echo", "ar", "en", "نص") == "new"
        assert len(path.read_text(encoding="utf-8").splitlines()) == 2  # append-only

    def test_digest_is_sha256_of_text(self, tmp_path):
        import hashlib

        path = tmp_path / "cache.jsonl"
        TranslationCache(path).put("p", "ar", "en", "نص", "out")
        entry = json.loads(path.read_text(encoding="utf-8"))
        assert entry["digest"] == hashlib.sha256("نص".encode()).hexdigest()
        assert set(entry) == {"provider_id", "src", "tgt", "digest", "output"}

    def test_keys_distinguish_provider_and_langs(self):
        c = TranslationCache(None)
        c.put("a", "ar", "en", "x", "1")
        assert c.get("b", "ar", "en", "x") is None
        assert c.get("a", "en", "ar", "x") is None
        assert c.get("a", "ar", "en", "x") == "1"


class TestExpand:
    def judgments(self):
        return [
            Judgment("q1", PassageId(1, 1, 1), 1),
            Judgment("q1", PassageId(2, 1, 1), 1),
            Judgment("q1", PassageId(3, 1, 1), 1),
        ]

    def test_expansion_counts_629_inputs(self):
        qs = [question(f"q{i}", text_ar=f"سؤال رقم {i}؟") for i in range(629)]
        out_q, out_j = paraphrase_and_expand(qs, [], EchoProvider(), 2, TranslationCache(None))
        assert len(out_q) == 1887  # 629 x (1 + 2); upstream reports 1,895 -- see stats note

    def test_judgment_replication(self):
        out_q, out_j = paraphrase_and_expand(
            [question("q1")], self.judgments(), EchoProvider(), 2, TranslationCache(None)
        )
        assert len(out_q) == 3
        assert len(out_j) == 9
        parent_set = {(str(j.passage_id), j.relevance) for j in self.judgments()}
        for pid in ("q1#p1", "q1#p2"):
            replica = {(str(j.passage_id), j.relevance) for j in out_j if j.question_id == pid}
            assert replica == parent_set

    def test_paraphrase_metadata_and_lineage(self):
        out_q, _ = paraphrase_and_expand(
            [question("q1", split=Split.DEV, qtype=QType.MULTI)],
            [],
            EchoProvider(),
            2,
            TranslationCache(None),
        )
        p1 = next(q for q in out_q if q.id == "q1#p1")
        assert p1.source == Source.PARAPHRASE
        assert p1.parent_id == "q1"
        assert p1.split == Split.DEV
        assert p1.qtype == QType.MULTI
        assert p1.text_en is None
        assert p1.text_ar.endswith("؟")

    def test_no_split_leakage(self):
        qs = [
            question("a", split=Split.TRAIN),
            question("b", text_ar="سؤال آخر؟", split=Split.TEST),
        ]
        out_q, _ = paraphrase_and_expand(qs, [], EchoProvider(), 3, TranslationCache(None))
        by_id = {q.id: q for q in out_q}
        for q in out_q:
            if q.parent_id:
                assert q.split == by_id[q.parent_id].split

    def test_empty_input(self):
        out_q, out_j = paraphrase_and_expand([], [], EchoProvider(), 1, TranslationCache(None))
        assert out_q == [] and out_j == []

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            paraphrase_and_expand([question("q1")], [], EchoProvider(), 0, TranslationCache(None))

    def test_paraphrase_inputs_rejected(self):
        p = question("q1#p1", source=Source.PARAPHRASE, parent_id="q1")
        with pytest.raises(InvariantViolationError):
            paraphrase_and_expand([p], [], EchoProvider(), 1, TranslationCache(None))

    def test_duplicate_provider_outputs_rejected(self):
        class DupProvider:
            provider_id = "dup"

            def paraphrase(self, text, lang, n):
                return [f"{text} x"] * n

        with pytest.raises(DuplicateParaphraseError):
            paraphrase_and_expand([question("q1")], [], DupProvider(), 2, TranslationCache(None))

    def test_cache_makes_expansion_pure(self, tmp_path):
        provider = CountingProvider()
        cache_path = tmp_path / "cache.jsonl"
        qs = [question("q1"), question("q2", text_ar="أين ولد عيسى؟")]
        first_q, _ = paraphrase_and_expand(qs, [], provider, 2, TranslationCache(cache_path))
        assert provider.paraphrase_calls == 2
        second_q, _ = paraphrase_and_expand(qs, [], provider, 2, TranslationCache(cache_path))
        assert provider.paraphrase_calls == 2
        assert first_q == second_q


class TestDedupe:
    def test_first_occurrence_wins(self):
        qs = [question("q1"), question("q2"), question("q3", text_ar="سؤال مختلف؟")]
        kept, dropped = dedupe_questions(qs)
        assert [q.id for q in kept] == ["q1", "q3"]
        assert dropped == ["q2"]

    def test_whitespace_variants_are_duplicates(self):
        qs = [question("q1", text_ar="من هو  موسى"), question("q2", text_ar=" من هو موسى؟ ")]
        kept, dropped = dedupe_questions(qs)
        assert dropped == ["q2"]

    def test_all_distinct_unchanged(self, mini_questions):
        kept, dropped = dedupe_questions(mini_questions)
        assert kept == list(mini_questions)
        assert dropped == []


# --- remote provider against a local stub -----------------------------------


class ProviderStub(BaseHTTPRequestHandler):
    status = 200

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if self.status != 200:
            self.send_response(self.status)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        if self.path == "/translate":
            payload = {"output": f"<{body['tgt']}>{body['text']}"}
        elif self.path == "/paraphrase":
            payload = {"outputs": [f"{body['text']} v{k}" for k in range(1, body["n"] + 1)]}
        else:
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        raw = json.dumps(payload, ensure_ascii=False).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture
def provider_stub():
    server = ThreadingHTTPServer(("127.0.0.1", 0), ProviderStub)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    ProviderStub.status = 200
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestRemoteProvider:
    def test_translate_and_paraphrase(self, provider_stub):
        p = RemoteProvider(provider_stub)
        assert p.translate("نص", "ar", "en") == "<en>نص"
        assert p.paraphrase("نص", "ar", 2) == ["نص v1", "نص v2"]

    def test_non_200_is_provider_error(self, provider_stub):
        ProviderStub.status = 503
        with pytest.raises(ProviderError, match="503"):
            RemoteProvider(provider_stub).translate("نص", "ar", "en")

    def test_unreachable(self):
        with pytest.raises(ProviderError):
            RemoteProvider("http://127.0.0.1:9", timeout=0.5).translate("نص", "ar", "en")

    def test_end_to_end_with_cache(self, provider_stub, tmp_path):
        cache = TranslationCache(tmp_path / "c.jsonl")
        out = translate_questions([question("q1")], RemoteProvider(provider_stub), cache)
        assert out[0].text_en == "<en>من هو موسى؟"
