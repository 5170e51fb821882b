"""Turn harvest records into a deduplicated, keyword-split dataset.

Splitting happens by keyword, never by pair: every context harvested
for one keyword lands in the same split, so evaluation keywords are
unseen at training time. Assignment is reproducible without an index
file: keywords are ordered by a stable hash of (seed, keyword) and the
ordered list is cut into train/val/test quotas computed from the
requested fractions by largest-remainder rounding, which keeps each
split within one keyword of its exact share.

Deduplication is exact-match only, case-folded on the keyword and
case-sensitive on the context.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Callable
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

from .errors import EmptyAfterDedup, FormatError
from .harvest import (
    MAX_SENTENCE_TOKENS,
    MIN_SENTENCE_TOKENS,
    HarvestRecord,
)
from .metrics import tokenize

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class KeywordContextPair:
    keyword: str
    context: str
    source_url: str = ""

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword,
            "context": self.context,
            "source_url": self.source_url,
        }


@dataclass
class DatasetManifest:
    """Construction parameters and per-split counts for one dataset."""

    n_keywords: int
    m_per_keyword: int
    split_fractions: tuple[float, float, float]
    counts: dict[str, int]
    seed: int
    created_at: str
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_keywords": self.n_keywords,
            "m_per_keyword": self.m_per_keyword,
            "split_fractions": list(self.split_fractions),
            "counts": dict(self.counts),
            "seed": self.seed,
            "created_at": self.created_at,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DatasetManifest":
        return cls(
            n_keywords=obj["n_keywords"],
            m_per_keyword=obj["m_per_keyword"],
            split_fractions=tuple(obj["split_fractions"]),
            counts=dict(obj["counts"]),
            seed=obj["seed"],
            created_at=obj["created_at"],
            warnings=list(obj.get("warnings", [])),
        )


class DatasetSplits(NamedTuple):
    train: list[KeywordContextPair]
    val: list[KeywordContextPair]
    test: list[KeywordContextPair]


def validate_fractions(fractions: tuple[float, float, float]) -> None:
    if len(fractions) != 3:
        raise ValueError(f"need exactly 3 split fractions, got {len(fractions)}")
    if any(f <= 0 for f in fractions):
        raise ValueError(f"split fractions must be positive: {fractions}")
    total = sum(fractions)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {total!r}")


def _keyword_position(keyword: str, seed: int) -> float:
    """Map (seed, keyword) to a stable point on the unit interval."""
    digest = hashlib.sha256(f"{seed}:{keyword}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def _quotas(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Largest-remainder rounding of ``n * fractions`` to integer quotas."""
    exact = [n * f for f in fractions]
    quotas = [int(x) for x in exact]
    leftovers = n - sum(quotas)
    order = sorted(range(3), key=lambda i: (quotas[i] - exact[i], i))
    for i in order[:leftovers]:
        quotas[i] += 1
    return quotas


def build_dataset(
    records: list[HarvestRecord],
    split_fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
    seed: int = 0,
    *,
    clock: Callable[[], datetime] | None = None,
) -> tuple[DatasetSplits, DatasetManifest]:
    """Deduplicate records and split them into train/val/test by keyword.

    Returns the three pair lists (record order preserved inside each)
    and a manifest. A requested fraction whose keyword quota rounds to
    zero is recorded as a manifest warning, not an error.

    Raises:
        EmptyAfterDedup: deduplication removed every record.
        ValueError: invalid split fractions.
    """
    validate_fractions(split_fractions)
    if not records:
        raise EmptyAfterDedup("no records to build from")

    pairs: list[KeywordContextPair] = []
    seen: set[tuple[str, str]] = set()
    for record in records:
        key = (record.keyword.casefold(), record.sentence)
        if key in seen:
            continue
        seen.add(key)
        pairs.append(
            KeywordContextPair(
                keyword=record.keyword,
                context=record.sentence,
                source_url=record.source_url,
            )
        )
    if not pairs:
        raise EmptyAfterDedup("deduplication removed every record")

    per_keyword: dict[str, int] = {}
    for pair in pairs:
        folded = pair.keyword.casefold()
        per_keyword[folded] = per_keyword.get(folded, 0) + 1
    keywords = sorted(per_keyword, key=lambda k: (_keyword_position(k, seed), k))

    quotas = _quotas(len(keywords), split_fractions)
    warnings = [
        f"{name} fraction {fraction} rounds to zero keywords"
        for name, fraction, quota in zip(SPLIT_NAMES, split_fractions, quotas)
        if quota == 0 and fraction > 0
    ]

    assignment: dict[str, str] = {}
    start = 0
    for name, quota in zip(SPLIT_NAMES, quotas):
        for keyword in keywords[start : start + quota]:
            assignment[keyword] = name
        start += quota

    splits = DatasetSplits([], [], [])
    for pair in pairs:
        split = assignment[pair.keyword.casefold()]
        getattr(splits, split).append(pair)

    manifest = DatasetManifest(
        n_keywords=len(keywords),
        m_per_keyword=max(per_keyword.values()),
        split_fractions=tuple(split_fractions),
        counts={name: len(getattr(splits, name)) for name in SPLIT_NAMES},
        seed=seed,
        created_at=_now_rfc3339(clock),
        warnings=warnings,
    )
    return splits, manifest


def _now_rfc3339(clock: Callable[[], datetime] | None) -> str:
    moment = clock() if clock is not None else datetime.now(timezone.utc)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def save_dataset(
    splits: DatasetSplits, manifest: DatasetManifest, out_dir: str | Path
) -> Path:
    """Write train/val/test.jsonl plus manifest.json under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        with (out_dir / f"{name}.jsonl").open("w", encoding="utf-8") as handle:
            for pair in getattr(splits, name):
                handle.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as handle:
        json.dump(manifest.to_dict(), handle, ensure_ascii=False, indent=2)
        handle.write("\n")
    return out_dir


def load_pairs(path: str | Path, *, strict: bool = False) -> list[KeywordContextPair]:
    """Read one split file.

    Always checks shape: valid JSON per line, string fields, non-blank
    keyword and context. With ``strict`` the harvested-sentence
    invariants are enforced too: the context must contain the keyword as
    a whole token and sit inside the 3..128 token window.

    Raises:
        FormatError: citing the file and 1-based line of the first
            violation.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError("file does not exist", str(path))
    pairs: list[KeywordContextPair] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc}", str(path), lineno)
            if not isinstance(obj, dict):
                raise FormatError("line is not a JSON object", str(path), lineno)
            for field_name in ("keyword", "context"):
                value = obj.get(field_name)
                if not isinstance(value, str) or not value.strip():
                    raise FormatError(
                        f"missing or blank field {field_name!r}", str(path), lineno
                    )
            keyword = obj["keyword"]
            context = obj["context"]
            source_url = obj.get("source_url", "")
            if not isinstance(source_url, str):
                raise FormatError("source_url must be a string", str(path), lineno)
            if any(ch.isspace() for ch in keyword):
                raise FormatError(
                    f"keyword contains whitespace: {keyword!r}", str(path), lineno
                )
            if strict:
                tokens = tokenize(context)
                if not MIN_SENTENCE_TOKENS <= len(tokens) <= MAX_SENTENCE_TOKENS:
                    raise FormatError(
                        f"context has {len(tokens)} tokens, outside "
                        f"[{MIN_SENTENCE_TOKENS}, {MAX_SENTENCE_TOKENS}]",
                        str(path),
                        lineno,
                    )
                if keyword.casefold() not in tokens:
                    raise FormatError(
                        f"context does not contain {keyword!r} as a whole token",
                        str(path),
                        lineno,
                    )
            pairs.append(
                KeywordContextPair(
                    keyword=keyword, context=context, source_url=source_url
                )
            )
    return pairs


def load_dataset(path: str | Path) -> tuple[list[KeywordContextPair], DatasetManifest]:
    """Load a dataset directory written by :func:`save_dataset`.

    Re-validates every pair invariant, checks pair uniqueness across the
    whole dataset, and compares per-split counts against the manifest.
    Returns all pairs in train, val, test file order.

    Raises:
        FormatError: naming the offending file (and line where scoped).
    """
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise FormatError("manifest.json not found", str(manifest_path))
    try:
        with manifest_path.open(encoding="utf-8") as handle:
            manifest = DatasetManifest.from_dict(json.load(handle))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid manifest: {exc!r}", str(manifest_path))

    all_pairs: list[KeywordContextPair] = []
    seen: set[tuple[str, str]] = set()
    for name in SPLIT_NAMES:
        split_path = path / f"{name}.jsonl"
        pairs = load_pairs(split_path, strict=True)
        expected = manifest.counts.get(name)
        if expected != len(pairs):
            raise FormatError(
                f"split {name!r} has {len(pairs)} pairs, manifest says {expected}",
                str(split_path),
            )
        for lineno, pair in enumerate(pairs, start=1):
            key = (pair.keyword.casefold(), pair.context)
            if key in seen:
                raise FormatError(
                    f"duplicate pair for keyword {pair.keyword!r}",
                    str(split_path),
                    lineno,
                )
            seen.add(key)
        all_pairs.extend(pairs)
    return all_pairs, manifest
