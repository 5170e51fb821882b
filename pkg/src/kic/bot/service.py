"""Command handling and the long-poll loop.

The bot knows four commands. ``/word w`` answers with up to three
generated sentences (one per prompt template, echo-stripped) and up to
two harvested examples, then saves the word to the user's list.
``/list`` enumerates saved words, ``/forget w`` removes one, and
``/start`` or anything unrecognized prints help. Replies never exceed
the 4096-character platform cap; over-long replies are cut at a
sentence boundary.

All platform traffic goes through :class:`BotClient`, whose base URL is
configurable, so tests run against a local fake server instead of the
real chat platform. The poll loop advances its persisted cursor only
after the reply is out and the profile is on disk, which gives
at-least-once processing; word saves are idempotent, so redelivery is
harmless.
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Callable
from dataclasses import dataclass

import requests

from ..errors import (
    AuthError,
    BackendUnreachable,
    InvalidKeyword,
    StoreError,
    TransportError,
)
from ..generation import (
    GenerationRequest,
    instantiate_prompts,
    strip_prompt_echo,
    validate_keyword,
)
from .store import ProfileStore, UserProfile, _utcnow

log = logging.getLogger(__name__)

REPLY_CAP = 4096
GENERATED_PER_LOOKUP = 3
HARVESTED_PER_LOOKUP = 2
DEFAULT_API_BASE = "https://api.telegram.org"

HELP_TEXT = (
    "I help you learn English words in context.\n"
    "\n"
    "Commands:\n"
    "/word <w> - example sentences using <w>, saved to your list\n"
    "/list - your saved words\n"
    "/forget <w> - remove <w> from your list\n"
    "/start - this help\n"
)

APOLOGY_LINE = (
    "Sorry, the sentence generator is unavailable right now; "
    "here is what the corpus has."
)

RETRY_LINE = "Something went wrong while saving; please try that again."


@dataclass(frozen=True)
class BotUpdate:
    update_id: int
    chat_id: int
    text: str


@dataclass
class BotDeps:
    """Injected collaborators: generation backend, harvester, clock."""

    backend: object | None = None
    harvester: Callable[[str], list[str]] | None = None
    clock: Callable[[], str] | None = None

    def now(self) -> str:
        return self.clock() if self.clock is not None else _utcnow()


def truncate_reply(text: str, cap: int = REPLY_CAP) -> str:
    """Cut an over-long reply at the last sentence boundary within the cap."""
    if len(text) <= cap:
        return text
    window = text[:cap]
    cut = max(window.rfind(ch) for ch in ".!?\n")
    if cut <= 0:
        return window
    return window[: cut + 1].rstrip()


def _generated_sentences(keyword: str, deps: BotDeps) -> tuple[list[str], bool]:
    """Up to three generations from distinct templates; flag is degraded mode."""
    if deps.backend is None:
        return [], True
    prompts = instantiate_prompts(keyword)[:GENERATED_PER_LOOKUP]
    sentences: list[str] = []
    failures = 0
    for prompt in prompts:
        try:
            raw = deps.backend.generate(GenerationRequest(prompt=prompt))
        except BackendUnreachable:
            failures += 1
            continue
        sentence = strip_prompt_echo(prompt, raw)
        if sentence:
            sentences.append(sentence)
    return sentences, failures == len(prompts)


def _harvested_sentences(keyword: str, deps: BotDeps) -> list[str]:
    if deps.harvester is None:
        return []
    try:
        return list(deps.harvester(keyword))[:HARVESTED_PER_LOOKUP]
    except Exception as exc:
        log.warning("harvester failed for %r: %s", keyword, exc)
        return []


def _word_reply(keyword: str, profile: UserProfile, deps: BotDeps) -> tuple[str, UserProfile]:
    generated, degraded = _generated_sentences(keyword, deps)
    harvested = _harvested_sentences(keyword, deps)

    lines = [f"Examples for \"{keyword}\":"]
    if degraded:
        lines.append(APOLOGY_LINE)
    for i, sentence in enumerate(generated, start=1):
        lines.append(f"{i}. {sentence}")
    if harvested:
        lines.append("From the corpus:")
        for sentence in harvested:
            lines.append(f"- {sentence}")
    if not generated and not harvested:
        lines.append("No examples found for this word.")

    updated = profile.with_word(keyword, added_at=deps.now())
    if updated is not profile:
        lines.append(f"Saved \"{keyword}\" ({len(updated.saved_words)} words on your list).")
    else:
        lines.append(f"\"{keyword}\" is already on your list.")
    return "\n".join(lines), updated


def handle_command(
    profile: UserProfile, text: str, deps: BotDeps
) -> tuple[str, UserProfile]:
    """Dispatch one message; returns the reply and the updated profile.

    Never raises for user input problems; those become reply text. The
    reply is always within the platform cap.
    """
    stripped = text.strip()
    parts = stripped.split(maxsplit=1)
    command = parts[0].casefold() if parts else ""
    argument = parts[1].strip() if len(parts) > 1 else ""

    if command == "/word":
        if not argument:
            return "Usage: /word <word>", profile
        try:
            validate_keyword(argument)
        except InvalidKeyword:
            return f"\"{argument}\" does not look like a single word.", profile
        reply, updated = _word_reply(argument, profile, deps)
        return truncate_reply(reply), updated

    if command == "/list":
        if not profile.saved_words:
            return "Your list is empty. Try /word <word>.", profile
        lines = ["Your words:"]
        for i, (word, added_at) in enumerate(profile.saved_words, start=1):
            lines.append(f"{i}. {word} (added {added_at})")
        return truncate_reply("\n".join(lines)), profile

    if command == "/forget":
        if not argument:
            return "Usage: /forget <word>", profile
        if not profile.has_word(argument):
            return f"\"{argument}\" is not on your list.", profile
        updated = profile.without_word(argument)
        return f"Forgot \"{argument}\".", updated

    return HELP_TEXT, profile


class BotClient:
    """Minimal chat-platform client with a configurable base URL."""

    def __init__(
        self,
        token: str,
        api_base: str = DEFAULT_API_BASE,
        *,
        poll_timeout: int = 30,
        request_timeout: float = 45.0,
    ):
        if not token:
            raise AuthError("empty bot token")
        self._root = f"{api_base.rstrip('/')}/bot{token}"
        self.poll_timeout = poll_timeout
        self.request_timeout = request_timeout
        self._session = requests.Session()

    def _check(self, response: requests.Response) -> dict:
        if response.status_code == 401:
            raise AuthError("chat platform rejected the bot token (HTTP 401)")
        if response.status_code != 200:
            raise TransportError(f"chat platform answered HTTP {response.status_code}")
        try:
            body = response.json()
        except (json.JSONDecodeError, ValueError):
            raise TransportError("chat platform answered non-JSON body")
        if not body.get("ok", False):
            raise TransportError(f"chat platform answered ok=false: {body}")
        return body

    def get_updates(self, offset: int) -> list[BotUpdate]:
        try:
            response = self._session.get(
                f"{self._root}/getUpdates",
                params={"offset": offset, "timeout": self.poll_timeout},
                timeout=self.request_timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(f"getUpdates failed: {exc}")
        body = self._check(response)
        updates: list[BotUpdate] = []
        for item in body.get("result", []):
            message = item.get("message") or {}
            chat = message.get("chat") or {}
            if "text" not in message or "id" not in chat:
                continue
            updates.append(
                BotUpdate(
                    update_id=item["update_id"],
                    chat_id=chat["id"],
                    text=message["text"],
                )
            )
        return updates

    def send_message(self, chat_id: int, text: str) -> None:
        try:
            response = self._session.post(
                f"{self._root}/sendMessage",
                json={"chat_id": chat_id, "text": text},
                timeout=self.request_timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(f"sendMessage failed: {exc}")
        self._check(response)


def process_updates_once(
    client: BotClient, store: ProfileStore, deps: BotDeps
) -> int:
    """One getUpdates sweep; returns how many updates were processed.

    Per update: handle the command, persist the profile, post the reply,
    then advance the cursor. A crash anywhere before the cursor write
    re-delivers the update on restart; saves are idempotent, so state
    stays correct and the worst case is a repeated reply.
    """
    updates = client.get_updates(offset=store.cursor())
    processed = 0
    for update in sorted(updates, key=lambda u: u.update_id):
        if update.update_id < store.cursor():
            continue
        profile = store.load_profile(update.chat_id)
        reply, new_profile = handle_command(profile, update.text, deps)
        try:
            store.save_profile(new_profile)
        except StoreError as exc:
            log.error("store write failed: %s", exc)
            reply = RETRY_LINE
        client.send_message(update.chat_id, reply)
        store.set_cursor(update.update_id + 1)
        processed += 1
    return processed


def poll_loop(
    token: str,
    deps: BotDeps,
    store: ProfileStore,
    *,
    api_base: str = DEFAULT_API_BASE,
    stop: Callable[[], bool] | None = None,
    backoff_base: float = 1.0,
    backoff_cap: float = 30.0,
) -> None:
    """Long-poll until ``stop()`` turns true (or forever).

    Transient transport errors back off exponentially and keep the loop
    alive. Auth failures propagate; they are fatal by contract.
    """
    client = BotClient(token, api_base)
    delay = backoff_base
    while stop is None or not stop():
        try:
            process_updates_once(client, store, deps)
            delay = backoff_base
        except AuthError:
            raise
        except TransportError as exc:
            log.warning("poll failed, backing off %.1fs: %s", delay, exc)
            time.sleep(delay)
            delay = min(delay * 2, backoff_cap)
