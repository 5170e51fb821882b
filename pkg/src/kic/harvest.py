"""Harvest example sentences for keywords from concordance-style pages.

The fetch layer is a rate-limited HTTP client with exponential-backoff
retries; one shared :class:`RateLimiter` paces every request the
harvester makes, no matter how many worker threads are in flight. The
parse layer walks the page with the stdlib HTML parser and pulls the
text of every container element matching a configurable (tag, class)
pair, so swapping concordance sources is a config change, not a code
change.

A sentence is kept only when it contains the keyword as a whole token
under the package tokenizer and is 3 to 128 tokens long; that drops
page boilerplate, fragments, and substring hits ("cat" never matches
"concatenate").
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import quote

import requests

from .errors import (
    FormatError,
    NotFound,
    ParseError,
    RateLimitedByServer,
    TransportError,
    WordlistError,
)
from .metrics import tokenize

log = logging.getLogger(__name__)

USER_AGENT = "kic-harvester/0.1 (+https://example.invalid/kic)"
MIN_SENTENCE_TOKENS = 3
MAX_SENTENCE_TOKENS = 128


@dataclass(frozen=True)
class Wordlist:
    """Ordered, case-fold-unique keywords plus where they came from."""

    words: tuple[str, ...]
    source_path: str = ""

    def __post_init__(self):
        seen = set()
        for word in self.words:
            if not word or any(ch.isspace() for ch in word):
                raise WordlistError(f"invalid wordlist entry: {word!r}")
            folded = word.casefold()
            if folded in seen:
                raise WordlistError(f"duplicate wordlist entry: {word!r}")
            seen.add(folded)

    def __len__(self) -> int:
        return len(self.words)


def load_wordlist(path: str | Path) -> Wordlist:
    """Read one keyword per line; blank lines and ``#`` comments skipped.

    Entries that duplicate an earlier one after case-folding are dropped
    silently. An entry containing whitespace raises
    :class:`WordlistError` naming the line.
    """
    path = Path(path)
    words: list[str] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            entry = raw.strip()
            if not entry or entry.startswith("#"):
                continue
            if any(ch.isspace() for ch in entry):
                raise WordlistError(
                    f"{path}:{lineno}: entry contains whitespace: {entry!r}"
                )
            folded = entry.casefold()
            if folded in seen:
                continue
            seen.add(folded)
            words.append(entry)
    return Wordlist(words=tuple(words), source_path=str(path))


@dataclass(frozen=True)
class HarvestConfig:
    """Fetch and parse settings for one harvest run."""

    top_m: int = 10
    base_url: str = "https://context.reverso.net/translation/english-spanish/{word}"
    rate_limit: float = 2.0  # requests per second, shared across threads
    timeout: float = 10.0
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_factor: float = 2.0
    parallelism: int = 4
    container_tag: str = "div"
    container_class: str = "example"

    def __post_init__(self):
        if self.top_m < 1:
            raise ValueError(f"top_m must be >= 1, got {self.top_m}")
        if self.rate_limit <= 0:
            raise ValueError(f"rate_limit must be > 0, got {self.rate_limit}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")

    def page_url(self, keyword: str) -> str:
        word = quote(keyword, safe="")
        if "{word}" in self.base_url:
            return self.base_url.format(word=word)
        return self.base_url.rstrip("/") + "/" + word


@dataclass(frozen=True)
class HarvestRecord:
    """One harvested (keyword, sentence) with provenance."""

    keyword: str
    sentence: str
    source_url: str
    fetched_at: str  # RFC 3339, UTC

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword,
            "sentence": self.sentence,
            "source_url": self.source_url,
            "fetched_at": self.fetched_at,
        }


@dataclass(frozen=True)
class SkipEntry:
    """Wordlist entry that produced no records, and why."""

    keyword: str
    reason: str


class RateLimiter:
    """Global pacing: consecutive request starts at least 1/rate apart."""

    def __init__(self, rate: float):
        if rate <= 0:
            raise ValueError(f"rate must be > 0, got {rate}")
        self._interval = 1.0 / rate
        self._lock = threading.Lock()
        self._next_start = time.monotonic()

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_start)
            self._next_start = start + self._interval
        delay = start - now
        if delay > 0:
            time.sleep(delay)


_RETRYABLE_MIN = 500


def fetch_page(
    keyword: str,
    config: HarvestConfig,
    *,
    limiter: RateLimiter | None = None,
    session: requests.Session | None = None,
) -> str:
    """GET the concordance page for one keyword.

    Retries connection failures, timeouts, 429, and 5xx with exponential
    backoff (``backoff_base * backoff_factor ** attempt``) up to
    ``max_retries`` extra attempts. Every attempt, first included, takes
    a slot from the rate limiter.

    Raises:
        NotFound: the server answered 404 (never retried).
        RateLimitedByServer: still 429 after all retries.
        TransportError: any other failure that survived the retries.
    """
    limiter = limiter or RateLimiter(config.rate_limit)
    get = session.get if session is not None else requests.get
    url = config.page_url(keyword)
    delay = config.backoff_base
    failure: TransportError | None = None
    for attempt in range(config.max_retries + 1):
        limiter.acquire()
        try:
            response = get(
                url, timeout=config.timeout, headers={"User-Agent": USER_AGENT}
            )
        except requests.RequestException as exc:
            failure = TransportError(f"{url}: {exc}")
        else:
            status = response.status_code
            if status == 200:
                return response.text
            if status == 404:
                raise NotFound(f"{url}: HTTP 404")
            if status == 429:
                failure = RateLimitedByServer(f"{url}: HTTP 429")
            elif status >= _RETRYABLE_MIN:
                failure = TransportError(f"{url}: HTTP {status}")
            else:
                raise TransportError(f"{url}: HTTP {status}")
        if attempt < config.max_retries:
            log.debug("retrying %s after %.2fs: %s", url, delay, failure)
            time.sleep(delay)
            delay *= config.backoff_factor
    assert failure is not None
    raise failure


class _ContainerTextParser(HTMLParser):
    """Collects the flattened text of every (tag, class) container."""

    def __init__(self, tag: str, cls: str):
        super().__init__(convert_charrefs=True)
        self._tag = tag
        self._cls = cls
        self._depth = 0  # nesting level of same-name tags inside a container
        self._parts: list[str] = []
        self.texts: list[str] = []
        self.containers_seen = 0

    def _matches(self, attrs) -> bool:
        if not self._cls:
            return True
        for name, value in attrs:
            if name == "class" and value and self._cls in value.split():
                return True
        return False

    def handle_starttag(self, tag, attrs):
        if self._depth > 0:
            if tag == self._tag:
                self._depth += 1
        elif tag == self._tag and self._matches(attrs):
            self.containers_seen += 1
            self._depth = 1
            self._parts = []

    def handle_endtag(self, tag):
        if self._depth > 0 and tag == self._tag:
            self._depth -= 1
            if self._depth == 0:
                self.texts.append(" ".join("".join(self._parts).split()))

    def handle_data(self, data):
        if self._depth > 0:
            self._parts.append(data)


def extract_sentences(
    html: str,
    keyword: str,
    top_m: int,
    *,
    source_url: str = "",
    fetched_at: str | datetime | None = None,
    container_tag: str = "div",
    container_class: str = "example",
) -> list[HarvestRecord]:
    """Pull up to ``top_m`` example sentences for ``keyword`` out of a page.

    Containers are elements whose tag and class match the configured
    pair; their text is flattened (tags stripped, entities decoded,
    whitespace collapsed to single spaces) in page order. Sentences that
    do not contain the keyword as a whole case-folded token, or that
    fall outside the 3..128 token window, are dropped.

    Raises:
        ParseError: the document has no matching container at all.
    """
    parser = _ContainerTextParser(container_tag, container_class)
    parser.feed(html)
    parser.close()
    if parser.containers_seen == 0:
        raise ParseError(
            f"no <{container_tag} class={container_class!r}> containers found"
        )
    stamp = _as_rfc3339(fetched_at)
    folded = keyword.casefold()
    records: list[HarvestRecord] = []
    for text in parser.texts:
        if len(records) >= top_m:
            break
        tokens = tokenize(text)
        if not MIN_SENTENCE_TOKENS <= len(tokens) <= MAX_SENTENCE_TOKENS:
            continue
        if folded not in tokens:
            continue
        records.append(
            HarvestRecord(
                keyword=keyword,
                sentence=text,
                source_url=source_url,
                fetched_at=stamp,
            )
        )
    return records


def _as_rfc3339(value: str | datetime | None) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        value = datetime.now(timezone.utc)
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


Clock = Callable[[], datetime]


def harvest(
    wordlist: Wordlist,
    config: HarvestConfig,
    *,
    clock: Clock | None = None,
) -> tuple[list[HarvestRecord], list[SkipEntry]]:
    """Fetch and extract sentences for every wordlist entry.

    Keywords are fetched on a thread pool of ``config.parallelism``
    workers sharing one rate limiter. Output order follows the wordlist,
    with each keyword's records in page order. Keywords that yield
    nothing are reported as skips (reason one of ``not-found``,
    ``parse-error``, ``transport-error``, ``no-examples``), never as
    failures.

    Raises:
        TransportError: only when every single keyword failed at the
            transport level.
    """
    if not wordlist.words:
        raise WordlistError("wordlist is empty")
    limiter = RateLimiter(config.rate_limit)
    local = threading.local()

    def fetch_one(word: str) -> tuple[list[HarvestRecord], SkipEntry | None]:
        if not hasattr(local, "session"):
            local.session = requests.Session()
        when = clock() if clock is not None else None
        try:
            html = fetch_page(word, config, limiter=limiter, session=local.session)
        except NotFound:
            return [], SkipEntry(word, "not-found")
        except TransportError as exc:
            log.warning("transport failure for %r: %s", word, exc)
            return [], SkipEntry(word, "transport-error")
        try:
            records = extract_sentences(
                html,
                word,
                config.top_m,
                source_url=config.page_url(word),
                fetched_at=when,
                container_tag=config.container_tag,
                container_class=config.container_class,
            )
        except ParseError:
            return [], SkipEntry(word, "parse-error")
        if not records:
            return [], SkipEntry(word, "no-examples")
        return records, None

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        results = list(pool.map(fetch_one, wordlist.words))

    records: list[HarvestRecord] = []
    skips: list[SkipEntry] = []
    for word_records, skip in results:
        records.extend(word_records)
        if skip is not None:
            skips.append(skip)
    transport_failures = sum(1 for s in skips if s.reason == "transport-error")
    if transport_failures == len(wordlist.words):
        raise TransportError(
            f"all {transport_failures} keywords failed at the transport level"
        )
    return records, skips


def write_records_jsonl(records: list[HarvestRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


def write_skips_jsonl(skips: list[SkipEntry], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for skip in skips:
            line = json.dumps(
                {"keyword": skip.keyword, "reason": skip.reason}, ensure_ascii=False
            )
            handle.write(line + "\n")


def read_records_jsonl(path: str | Path) -> list[HarvestRecord]:
    """Load harvest records written by :func:`write_records_jsonl`."""
    path = Path(path)
    records: list[HarvestRecord] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc}", str(path), lineno)
            for key in ("keyword", "sentence", "source_url", "fetched_at"):
                if key not in obj or not isinstance(obj[key], str):
                    raise FormatError(f"missing or non-string field {key!r}",
                                      str(path), lineno)
            if not obj["keyword"]:
                raise FormatError("blank keyword", str(path), lineno)
            records.append(
                HarvestRecord(
                    keyword=obj["keyword"],
                    sentence=obj["sentence"],
                    source_url=obj["source_url"],
                    fetched_at=obj["fetched_at"],
                )
            )
    return records
