"""Read datasets in the builder's split-file format.

A dataset directory holds train.jsonl (and usually val.jsonl and
test.jsonl) with one ``{"keyword", "context", ...}`` object per line.
Training examples pair an instantiated prompt template with the
reference context; templates cycle by pair index.
"""

from __future__ import annotations

import json
from pathlib import Path

from .prompts import prompt_for


class DataError(Exception):
    """Dataset directory or file failed validation; message carries file/line."""


def read_split(path: str | Path) -> list[tuple[str, str]]:
    """One split file into (keyword, context) rows, strictly validated."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: split file does not exist")
    rows: list[tuple[str, str]] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}")
            keyword = obj.get("keyword")
            context = obj.get("context")
            if not isinstance(keyword, str) or not keyword.strip():
                raise DataError(f"{path}:{lineno}: missing or blank 'keyword'")
            if not isinstance(context, str) or not context.strip():
                raise DataError(f"{path}:{lineno}: missing or blank 'context'")
            rows.append((keyword, context))
    return rows


def load_training_pairs(dataset_dir: str | Path) -> list[tuple[str, str]]:
    """(prompt, target) pairs from ``dataset_dir/train.jsonl``.

    The prompt for the i-th pair uses template ``i mod 5``, so every
    keyword earns a spread of phrasings across its contexts.
    """
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.is_dir():
        raise DataError(f"{dataset_dir}: dataset directory does not exist")
    rows = read_split(dataset_dir / "train.jsonl")
    if not rows:
        raise DataError(f"{dataset_dir / 'train.jsonl'}: no training pairs")
    return [
        (prompt_for(keyword, index), context)
        for index, (keyword, context) in enumerate(rows)
    ]
