"""Serve any generation backend over the wire protocol.

Backed by the stdlib threading HTTP server so it can run in-process for
tests or as a foreground process for ``kic serve-stub``. An optional
warmup window emulates a backend that is still loading: until it ends,
both endpoints answer 503 with ``{"status": "loading"}``.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .generation import GenerationRequest

log = logging.getLogger(__name__)


class BackendHttpServer:
    """Expose a backend handle at POST /generate and GET /healthz."""

    def __init__(
        self,
        backend,
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        warmup_seconds: float = 0.0,
    ):
        self.backend = backend
        ready_at = time.monotonic() + warmup_seconds
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                log.debug("wireserver: " + fmt, *args)

            def _reply(self, status: int, payload: dict) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _loading(self) -> bool:
                if time.monotonic() < ready_at:
                    self._reply(503, {"status": "loading"})
                    return True
                return False

            def do_GET(self):
                if self.path != "/healthz":
                    self._reply(404, {"error": f"no such path: {self.path}"})
                    return
                if self._loading():
                    return
                self._reply(
                    200, {"status": "ok", "model_id": outer.backend.backend_id}
                )

            def do_POST(self):
                # Drain the body before any reply; an unread body would
                # bleed into the next request on a kept-alive connection.
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length)
                if self.path != "/generate":
                    self._reply(404, {"error": f"no such path: {self.path}"})
                    return
                if self._loading():
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
                try:
                    request = GenerationRequest(
                        prompt=payload["prompt"],
                        max_new_tokens=int(payload.get("max_new_tokens", 50)),
                        num_return_sequences=int(
                            payload.get("num_return_sequences", 1)
                        ),
                    )
                except (TypeError, ValueError) as exc:
                    self._reply(400, {"error": str(exc)})
                    return
                text = outer.backend.generate(request)
                self._reply(
                    200, {"text": text, "model_id": outer.backend.backend_id}
                )

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "BackendHttpServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="kic-wireserver", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def __enter__(self) -> "BackendHttpServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
