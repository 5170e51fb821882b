"""Prompt templates and generation backends.

Five fixed prompt templates turn a keyword into generation requests.
A backend is anything with a ``backend_id`` and a ``generate(request)``
method returning the generated text; two ship here. ``StubBackend``
answers deterministically in-process and exists so every downstream
stage can be tested hermetically. ``HttpBackend`` speaks the wire
protocol:

    POST {base_url}/generate
        {"prompt": str, "max_new_tokens": int, "num_return_sequences": int}
        -> 200 {"text": str, "model_id": str}
    GET {base_url}/healthz -> 200 {"status": "ok", "model_id": str}

503 answers (model still loading) are retried up to three times.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import requests

from .errors import BackendUnreachable, InvalidKeyword, ProtocolError

log = logging.getLogger(__name__)

PROMPT_PLACEHOLDER = "{prompt}"

PROMPT_TEMPLATES: tuple[str, ...] = (
    "Create a sentence using the word {prompt} that showcases its usage in a common context.",
    "Write a sentence that uses the word {prompt} in everyday language.",
    "Formulate a sentence with the word {prompt} to demonstrate its typical usage.",
    "Construct a sentence that includes the word {prompt} in a familiar context.",
    "Compose a sentence that features the word {prompt} in a general setting.",
)

DEFAULT_MAX_NEW_TOKENS = 50
LOADING_RETRIES = 3


@dataclass(frozen=True)
class PromptTemplate:
    template: str
    index: int

    def __post_init__(self):
        if self.template.count(PROMPT_PLACEHOLDER) != 1:
            raise ValueError(
                f"template must contain exactly one {PROMPT_PLACEHOLDER!r} slot"
            )
        if not 0 <= self.index <= 4:
            raise ValueError(f"template index out of range: {self.index}")

    def instantiate(self, keyword: str) -> str:
        return self.template.replace(PROMPT_PLACEHOLDER, keyword)


TEMPLATES: tuple[PromptTemplate, ...] = tuple(
    PromptTemplate(template=text, index=i) for i, text in enumerate(PROMPT_TEMPLATES)
)


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    num_return_sequences: int = 1

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.num_return_sequences < 1:
            raise ValueError("num_return_sequences must be >= 1")

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "max_new_tokens": self.max_new_tokens,
            "num_return_sequences": self.num_return_sequences,
        }


@dataclass
class GenerationBatch:
    """One keyword's five generations, in template-index order.

    A slot whose call failed holds an empty sentence; the batch always
    has exactly five entries.
    """

    keyword: str
    generations: list[tuple[int, str]]
    backend_id: str
    latency_ms: list[int] = field(default_factory=list)


def validate_keyword(keyword: str) -> None:
    if not keyword or any(ch.isspace() for ch in keyword):
        raise InvalidKeyword(f"keyword must be a single non-empty word: {keyword!r}")


def instantiate_prompts(keyword: str) -> list[str]:
    """The five template instantiations for one keyword, in fixed order.

    Raises:
        InvalidKeyword: empty keyword or keyword containing whitespace.
    """
    validate_keyword(keyword)
    return [template.instantiate(keyword) for template in TEMPLATES]


class StubBackend:
    """Deterministic in-process backend for hermetic tests and dry runs.

    Recognizes the five shipped prompts and answers with a canonical
    sentence carrying the keyword and the 1-based template number.
    """

    backend_id = "stub"

    def generate(self, request: GenerationRequest) -> str:
        for template in TEMPLATES:
            prefix, suffix = template.template.split(PROMPT_PLACEHOLDER)
            prompt = request.prompt
            if (
                prompt.startswith(prefix)
                and prompt.endswith(suffix)
                and len(prompt) > len(prefix) + len(suffix)
            ):
                word = prompt[len(prefix) : len(prompt) - len(suffix)]
                return (
                    f"The word {word} appears in this example sentence "
                    f"number {template.index + 1}."
                )
        return "This stub only understands its own prompt templates."

    def healthz(self) -> dict:
        return {"status": "ok", "model_id": self.backend_id}


class HttpBackend:
    """Wire-protocol client for a remote generation server."""

    def __init__(self, backend_id: str, base_url: str, *, timeout: float = 60.0):
        self.backend_id = backend_id
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def generate(self, request: GenerationRequest) -> str:
        url = f"{self.base_url}/generate"
        response = None
        for attempt in range(LOADING_RETRIES + 1):
            try:
                response = self._session.post(
                    url, json=request.to_dict(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise BackendUnreachable(f"{url}: {exc}")
            if response.status_code != 503 or attempt == LOADING_RETRIES:
                break
            log.debug("%s still loading, retry %d", url, attempt + 1)
            time.sleep(0.5 * (attempt + 1))
        assert response is not None
        if response.status_code == 503:
            raise BackendUnreachable(f"{url}: still loading after retries")
        if response.status_code != 200:
            raise ProtocolError(f"{url}: HTTP {response.status_code}")
        try:
            body = response.json()
        except (json.JSONDecodeError, ValueError):
            raise ProtocolError(f"{url}: response body is not JSON")
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise ProtocolError(f"{url}: response lacks a string 'text' field")
        return body["text"]

    def healthz(self) -> dict:
        url = f"{self.base_url}/healthz"
        try:
            response = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendUnreachable(f"{url}: {exc}")
        if response.status_code != 200:
            raise BackendUnreachable(f"{url}: HTTP {response.status_code}")
        try:
            return response.json()
        except (json.JSONDecodeError, ValueError):
            raise ProtocolError(f"{url}: healthz body is not JSON")


def strip_prompt_echo(prompt: str, text: str) -> str:
    """Drop a verbatim prompt prefix from a generation, then trim."""
    if text.startswith(prompt):
        text = text[len(prompt) :]
    return text.strip()


def generate_batch(keyword: str, backend) -> GenerationBatch:
    """Run all five prompts for one keyword against a backend.

    Transport failures are tolerated per slot (the slot keeps an empty
    sentence); only when all five calls fail does the batch raise.
    Prompt echoes are stripped and sentences whitespace-trimmed.

    Raises:
        BackendUnreachable: every one of the five calls failed.
        ProtocolError: the backend answered with a malformed body.
    """
    prompts = instantiate_prompts(keyword)
    generations: list[tuple[int, str]] = []
    latencies: list[int] = []
    failures = 0
    for index, prompt in enumerate(prompts):
        request = GenerationRequest(prompt=prompt)
        started = time.perf_counter()
        try:
            raw = backend.generate(request)
        except BackendUnreachable as exc:
            log.warning("slot %d for %r failed: %s", index, keyword, exc)
            failures += 1
            raw = prompt  # strips to an empty sentence below
        elapsed_ms = int((time.perf_counter() - started) * 1000)
        generations.append((index, strip_prompt_echo(prompt, raw)))
        latencies.append(elapsed_ms)
    if failures == len(prompts):
        raise BackendUnreachable(
            f"all {failures} generation calls failed for {keyword!r}"
        )
    return GenerationBatch(
        keyword=keyword,
        generations=generations,
        backend_id=getattr(backend, "backend_id", "unknown"),
        latency_ms=latencies,
    )
