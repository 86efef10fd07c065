"""The retrieval pipeline's remote-scorer client run against this service.

These tests drive ayahqa's actual HTTP client (its external interface to
this sidecar) at the echo server: positional alignment, batch splitting at
the 128-passage wire limit, and the client's refusal to accept misaligned
responses.
"""

import json
import threading

import pytest

from ayahqa.errors import ProtocolError
from ayahqa.scorer import MAX_PASSAGES_PER_REQUEST, remote_score_batch

from ayah_sidecar.server import ScoreHandler, ScoringApp


class CountingHandler(ScoreHandler):
    """Echo handler that records the size of each /score request."""

    request_sizes = []

    def do_POST(self):
        if self.path == "/score":
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length))
            type(self).request_sizes.append(len(body["passages"]))
            scores = [0.5] * len(body["passages"])
            self._reply(200, {"scores": scores})
        else:
            super().do_POST()


class DroppingHandler(ScoreHandler):
    """Deliberately broken variant: returns one score too few."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length))
        scores = [0.5] * len(body["passages"])
        self._reply(200, {"scores": scores[:-1]})


def serve_app(handler_cls):
    from http.server import ThreadingHTTPServer

    app = ScoringApp(echo=True)
    handler = type("Bound", (handler_cls,), {"app": app})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server, f"http://127.0.0.1:{server.server_port}"


@pytest.fixture
def echo_endpoint():
    server, url = serve_app(ScoreHandler)
    yield url
    server.shutdown()


@pytest.mark.acceptance
def test_wire_conformance_alignment_and_batching(echo_endpoint):
    # alignment for a plain batch
    scores = remote_score_batch("question?", ["a", "b", "c"], echo_endpoint)
    assert scores == [0.5, 0.5, 0.5]

    # batch splitting at the 128-passage wire limit, reassembled in order
    server, url = serve_app(CountingHandler)
    CountingHandler.request_sizes = []
    try:
        passages = [f"p{i}" for i in range(300)]
        scores = remote_score_batch("question?", passages, url)
        assert scores == [0.5] * 300
        assert sorted(CountingHandler.request_sizes) == [44, 128, 128]
        assert max(CountingHandler.request_sizes) <= MAX_PASSAGES_PER_REQUEST
    finally:
        server.shutdown()


@pytest.mark.acceptance
def test_wire_conformance_length_mismatch_rejected():
    server, url = serve_app(DroppingHandler)
    try:
        with pytest.raises(ProtocolError, match="scores for"):
            remote_score_batch("question?", ["a", "b", "c"], url)
    finally:
        server.shutdown()


def test_pipeline_health_check(echo_endpoint):
    from ayahqa.scorer import RemoteScorer

    health = RemoteScorer(echo_endpoint).health()
    assert health == {"status": "ok", "model": "echo"}
