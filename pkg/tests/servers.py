"""Local HTTP servers used by the tests: a scriptable fixture site that
stands in for the concordance source, and a fake chat platform."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlparse


@dataclass
class LoggedRequest:
    at: float  # monotonic seconds
    method: str
    path: str


def example_page(word: str, sentences: list[str]) -> str:
    """A concordance-style page with one div.example per sentence."""
    blocks = "\n".join(
        f'  <div class="example">\n    <span class="text">{s}</span>\n  </div>'
        for s in sentences
    )
    return (
        "<!DOCTYPE html>\n"
        f"<html><head><title>{word} - usage examples</title></head>\n"
        "<body>\n<main id=\"examples\">\n"
        f"{blocks}\n"
        "</main>\n</body></html>\n"
    )


def default_sentences(word: str, count: int) -> list[str]:
    return [
        f"Sentence {i} shows how {word} fits into ordinary prose."
        for i in range(1, count + 1)
    ]


class FixtureSite:
    """Serves deterministic concordance pages at /words/{word}.

    Behaviors are scripted per word: a word can 404, fail with 500 a set
    number of times before succeeding, answer 429, or serve a fixed
    body. Every request is logged with a monotonic timestamp so tests
    can measure pacing.
    """

    def __init__(self, examples_per_word: int = 5):
        self.examples_per_word = examples_per_word
        self.log: list[LoggedRequest] = []
        self.not_found: set[str] = set()
        self.fail_first: dict[str, int] = {}  # word -> remaining 500s
        self.always_429: set[str] = set()
        self.pages: dict[str, str] = {}  # word -> exact body
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def _send(self, status: int, body: str, ctype="text/html"):
                data = body.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                with outer._lock:
                    outer.log.append(
                        LoggedRequest(time.monotonic(), "GET", self.path)
                    )
                parsed = urlparse(self.path)
                if not parsed.path.startswith("/words/"):
                    self._send(404, "no such page")
                    return
                word = unquote(parsed.path[len("/words/") :])
                with outer._lock:
                    if word in outer.not_found:
                        self._send(404, "no such word")
                        return
                    if word in outer.always_429:
                        self._send(429, "slow down")
                        return
                    remaining = outer.fail_first.get(word, 0)
                    if remaining > 0:
                        outer.fail_first[word] = remaining - 1
                        self._send(500, "flaky")
                        return
                    body = outer.pages.get(word)
                if body is None:
                    body = example_page(
                        word, default_sentences(word, outer.examples_per_word)
                    )
                self._send(200, body)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/words/{{word}}"

    def requests_for(self, word: str) -> list[LoggedRequest]:
        with self._lock:
            return [r for r in self.log if r.path.endswith(f"/words/{word}")]

    def start(self) -> "FixtureSite":
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class FakeChatServer:
    """In-memory chat platform: getUpdates + sendMessage.

    Updates are queued by the test; getUpdates returns the ones at or
    past the requested offset (no blocking). Sent messages are recorded.
    A wrong token yields 401.
    """

    def __init__(self, token: str):
        self.token = token
        self.updates: list[dict] = []
        self.sent: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def _send_json(self, status: int, payload: dict):
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def _route(self) -> tuple[str, str] | None:
                parsed = urlparse(self.path)
                parts = parsed.path.strip("/").split("/")
                if len(parts) != 2 or not parts[0].startswith("bot"):
                    self._send_json(404, {"ok": False})
                    return None
                token = parts[0][3:]
                if token != outer.token:
                    self._send_json(
                        401, {"ok": False, "description": "Unauthorized"}
                    )
                    return None
                return parts[1], parsed.query

            def do_GET(self):
                route = self._route()
                if route is None:
                    return
                method, query = route
                if method != "getUpdates":
                    self._send_json(404, {"ok": False})
                    return
                params = parse_qs(query)
                offset = int(params.get("offset", ["0"])[0])
                with outer._lock:
                    result = [
                        u for u in outer.updates if u["update_id"] >= offset
                    ]
                self._send_json(200, {"ok": True, "result": result})

            def do_POST(self):
                route = self._route()
                if route is None:
                    return
                method, _ = route
                if method != "sendMessage":
                    self._send_json(404, {"ok": False})
                    return
                length = int(self.headers.get("Content-Length") or 0)
                payload = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.sent.append(payload)
                self._send_json(200, {"ok": True, "result": {}})

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def queue_text(self, update_id: int, chat_id: int, text: str) -> None:
        with self._lock:
            self.updates.append(
                {
                    "update_id": update_id,
                    "message": {"chat": {"id": chat_id}, "text": text},
                }
            )

    def sent_texts(self, chat_id: int | None = None) -> list[str]:
        with self._lock:
            return [
                m["text"]
                for m in self.sent
                if chat_id is None or m.get("chat_id") == chat_id
            ]

    def start(self) -> "FakeChatServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
