"""Durable single-file store for chat profiles and the poll cursor.

The whole state is one versioned JSON document rewritten atomically
(write to a temp file in the same directory, fsync, rename), so a crash
at any point leaves either the old state or the new state, never a torn
file. Readers share a lock with the single writer; the store is safe to
use from the poll loop plus helper threads.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import StoreError

STORE_VERSION = 1
MAX_SAVED_WORDS = 500


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass
class UserProfile:
    chat_id: int
    saved_words: list[tuple[str, str]] = field(default_factory=list)  # (word, added_at)
    created_at: str = ""

    def words(self) -> list[str]:
        return [word for word, _ in self.saved_words]

    def has_word(self, word: str) -> bool:
        folded = word.casefold()
        return any(saved.casefold() == folded for saved, _ in self.saved_words)

    def with_word(self, word: str, added_at: str | None = None) -> "UserProfile":
        """Copy of this profile with ``word`` appended (case-fold unique).

        Oldest entries are dropped once the list would exceed the cap.
        """
        if self.has_word(word):
            return self
        saved = list(self.saved_words) + [(word, added_at or _utcnow())]
        if len(saved) > MAX_SAVED_WORDS:
            saved = saved[-MAX_SAVED_WORDS:]
        return UserProfile(
            chat_id=self.chat_id, saved_words=saved, created_at=self.created_at
        )

    def without_word(self, word: str) -> "UserProfile":
        folded = word.casefold()
        saved = [
            entry for entry in self.saved_words if entry[0].casefold() != folded
        ]
        return UserProfile(
            chat_id=self.chat_id, saved_words=saved, created_at=self.created_at
        )

    def to_dict(self) -> dict:
        return {
            "chat_id": self.chat_id,
            "saved_words": [
                {"word": word, "added_at": added_at}
                for word, added_at in self.saved_words
            ],
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "UserProfile":
        return cls(
            chat_id=obj["chat_id"],
            saved_words=[
                (entry["word"], entry["added_at"]) for entry in obj["saved_words"]
            ],
            created_at=obj["created_at"],
        )


class ProfileStore:
    """chat_id -> UserProfile plus the getUpdates offset cursor."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open(encoding="utf-8") as handle:
                state = json.load(handle)
            if state.get("version") != STORE_VERSION:
                raise StoreError(
                    f"{self.path}: unsupported store version {state.get('version')!r}"
                )
            self._state = state
        else:
            self._state = {"version": STORE_VERSION, "cursor": 0, "profiles": {}}

    def cursor(self) -> int:
        with self._lock:
            return self._state["cursor"]

    def set_cursor(self, value: int) -> None:
        with self._lock:
            previous = self._state["cursor"]
            self._state["cursor"] = value
            try:
                self._flush()
            except StoreError:
                self._state["cursor"] = previous
                raise

    def load_profile(self, chat_id: int) -> UserProfile:
        with self._lock:
            raw = self._state["profiles"].get(str(chat_id))
        if raw is None:
            return UserProfile(chat_id=chat_id, created_at=_utcnow())
        return UserProfile.from_dict(raw)

    def save_profile(self, profile: UserProfile) -> None:
        # Failed writes roll the in-memory state back so a retry starts clean.
        with self._lock:
            key = str(profile.chat_id)
            previous = self._state["profiles"].get(key)
            self._state["profiles"][key] = profile.to_dict()
            try:
                self._flush()
            except StoreError:
                if previous is None:
                    self._state["profiles"].pop(key, None)
                else:
                    self._state["profiles"][key] = previous
                raise

    def _flush(self) -> None:
        """Atomic rewrite; caller holds the lock."""
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with tmp.open("w", encoding="utf-8") as handle:
                json.dump(self._state, handle, ensure_ascii=False, indent=2)
                handle.write("\n")
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp, self.path)
        except OSError as exc:
            raise StoreError(f"cannot write {self.path}: {exc}")
