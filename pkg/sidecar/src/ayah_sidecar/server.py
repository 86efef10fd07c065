"""HTTP scoring service implementing the retrieval pipeline's wire protocol.

POST /score  {"question": str, "passages": [str, ...]} -> {"scores": [float, ...]}
GET  /health -> 200 {"status": "ok", "model": <name>} once loaded, 503 before.

Malformed score requests get 400. Echo mode answers 0.5 for every passage,
which is enough to exercise the client contract without a model. Inference
is serialized behind a lock, so identical requests score identically for
the lifetime of the server.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import torch

from .model import CrossEncoder, load_checkpoint

logger = logging.getLogger(__name__)


class ScoringApp:
    def __init__(
        self, model: CrossEncoder | None = None, echo: bool = False, *, defer_load: bool = False
    ):
        if not echo and model is None and not defer_load:
            raise ValueError("either a model or echo mode is required")
        self.echo = echo
        self.model = model
        if echo:
            self.model_name = "echo"
        elif model is not None:
            self.model_name = model.config.base
        else:
            self.model_name = "loading"
        self.ready = threading.Event()
        self._lock = threading.Lock()
        if echo or model is not None:
            self.ready.set()

    @classmethod
    def loading(cls) -> "ScoringApp":
        """App shell in the not-yet-loaded state; call attach() when ready."""
        return cls(defer_load=True)

    def attach(self, model: CrossEncoder) -> None:
        self.model = model
        self.model_name = model.config.base
        self.ready.set()

    def score(self, question: str, passages: list[str]) -> list[float]:
        if self.echo:
            return [0.5] * len(passages)
        with self._lock:
            return self.model.score_pairs([(question, p) for p in passages])


class ScoreHandler(BaseHTTPRequestHandler):
    app: ScoringApp  # bound by make_server

    def _reply(self, status: int, payload: dict) -> None:
        raw = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self):
        if self.path != "/health":
            self._reply(404, {"error": "not found"})
            return
        if not self.app.ready.is_set():
            self._reply(503, {"status": "loading"})
            return
        self._reply(200, {"status": "ok", "model": self.app.model_name})

    def do_POST(self):
        if self.path != "/score":
            self._reply(404, {"error": "not found"})
            return
        if not self.app.ready.is_set():
            self._reply(503, {"status": "loading"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": "body must be JSON"})
            return
        if not isinstance(body, dict):
            self._reply(400, {"error": "body must be a JSON object"})
            return
        question = body.get("question")
        passages = body.get("passages")
        if not isinstance(question, str):
            self._reply(400, {"error": "missing string field 'question'"})
            return
        if not isinstance(passages, list) or not all(isinstance(p, str) for p in passages):
            self._reply(400, {"error": "missing list-of-strings field 'passages'"})
            return
        scores = self.app.score(question, passages)
        self._reply(200, {"scores": scores})

    def log_message(self, format, *args):  # quiet by default; logging has it
        logger.debug("%s - %s", self.address_string(), format % args)


def make_server(app: ScoringApp, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    handler = type("BoundScoreHandler", (ScoreHandler,), {"app": app})
    return ThreadingHTTPServer((host, port), handler)


def serve(model_dir: str | Path | None, port: int, echo: bool = False) -> None:
    """Blocking entry point; loads the checkpoint in the background so
    /health answers 503 while loading."""
    torch.set_num_threads(1)
    if echo:
        app = ScoringApp(echo=True)
    else:
        app = ScoringApp.loading()

        def load():
            app.attach(load_checkpoint(model_dir))
            logger.info("model %s loaded", app.model_name)

        threading.Thread(target=load, daemon=True).start()
    server = make_server(app, port=port)
    logger.info("serving on port %d (echo=%s)", server.server_port, echo)
    print(f"listening on {server.server_address[0]}:{server.server_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
