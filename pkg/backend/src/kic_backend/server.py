"""Serve a model behind the generation wire protocol.

The model loads on a background thread; until it is ready both
endpoints answer 503 with ``{"status": "loading"}``, after which
/healthz reports the model id and /generate runs greedy decoding with
the request's ``max_new_tokens``. Malformed bodies get 400. If loading
fails the server keeps answering 503 and carries the failure message in
the body rather than dying silently.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .modeling import LoadedModel, generate_text, load_model

log = logging.getLogger(__name__)

DEFAULT_MAX_NEW_TOKENS = 50


class ModelServer:
    """Wire-protocol server around one model name or checkpoint path."""

    def __init__(
        self,
        name_or_path: str,
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        seed: int = 0,
        load_delay_seconds: float = 0.0,
    ):
        self.name_or_path = name_or_path
        self._seed = seed
        self._load_delay = load_delay_seconds
        self._loaded: LoadedModel | None = None
        self._load_error: str | None = None
        self._generate_lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                log.debug("modelserver: " + fmt, *args)

            def _reply(self, status: int, payload: dict) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _unready(self) -> bool:
                if outer._loaded is not None:
                    return False
                payload = {"status": "loading"}
                if outer._load_error is not None:
                    payload = {"status": "loading", "error": outer._load_error}
                self._reply(503, payload)
                return True

            def do_GET(self):
                if self.path != "/healthz":
                    self._reply(404, {"error": f"no such path: {self.path}"})
                    return
                if self._unready():
                    return
                self._reply(
                    200, {"status": "ok", "model_id": outer._loaded.model_id}
                )

            def do_POST(self):
                # Drain the body before any reply; an unread body would
                # bleed into the next request on a kept-alive connection.
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length)
                if self.path != "/generate":
                    self._reply(404, {"error": f"no such path: {self.path}"})
                    return
                if self._unready():
                    return
                try:
                    payload = json.loads(raw)
                except json.JSONDecodeError:
                    self._reply(400, {"error": "request body is not valid JSON"})
                    return
                if not isinstance(payload, dict) or not isinstance(
                    payload.get("prompt"), str
                ):
                    self._reply(400, {"error": "missing string field 'prompt'"})
                    return
                max_new_tokens = payload.get("max_new_tokens", DEFAULT_MAX_NEW_TOKENS)
                num_sequences = payload.get("num_return_sequences", 1)
                if (
                    not isinstance(max_new_tokens, int)
                    or isinstance(max_new_tokens, bool)
                    or max_new_tokens < 1
                ):
                    self._reply(400, {"error": "max_new_tokens must be a positive int"})
                    return
                if num_sequences != 1:
                    self._reply(
                        400, {"error": "num_return_sequences must be 1"}
                    )
                    return
                with outer._generate_lock:
                    text = generate_text(
                        outer._loaded, payload["prompt"], max_new_tokens
                    )
                self._reply(
                    200, {"text": text, "model_id": outer._loaded.model_id}
                )

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._serve_thread: threading.Thread | None = None
        self._load_thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def _load(self) -> None:
        if self._load_delay > 0:
            time.sleep(self._load_delay)
        try:
            self._loaded = load_model(self.name_or_path, seed=self._seed)
        except Exception as exc:
            self._load_error = str(exc)
            log.error("model load failed: %s", exc)
        else:
            log.info("model %s ready", self._loaded.model_id)

    def start(self) -> "ModelServer":
        self._load_thread = threading.Thread(target=self._load, daemon=True)
        self._load_thread.start()
        self._serve_thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._serve_thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._serve_thread is not None:
            self._serve_thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._load_thread = threading.Thread(target=self._load, daemon=True)
        self._load_thread.start()
        self._server.serve_forever()

    def __enter__(self) -> "ModelServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
