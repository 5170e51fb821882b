from __future__ import annotations

import json
from pathlib import Path

import pytest


@pytest.fixture
def toy_dataset_dir(tmp_path) -> Path:
    """A 10-pair dataset in the builder's split-file format."""
    contexts = {
        "cat": [
            "The cat sat on the mat.",
            "A cat chased the ball of yarn.",
            "Every cat enjoys a warm windowsill.",
            "The cat slept through the storm.",
            "Our cat knows the sound of the can opener.",
        ],
        "run": [
            "They run along the river every morning.",
            "Buses run every ten minutes here.",
            "I run faster when the music is loud.",
            "Engines run better with clean oil.",
            "We run a small stall at the market.",
        ],
    }
    dataset_dir = tmp_path / "dataset"
    dataset_dir.mkdir()
    with (dataset_dir / "train.jsonl").open("w", encoding="utf-8") as handle:
        for keyword, sentences in contexts.items():
            for sentence in sentences:
                handle.write(
                    json.dumps({"keyword": keyword, "context": sentence}) + "\n"
                )
    return dataset_dir
