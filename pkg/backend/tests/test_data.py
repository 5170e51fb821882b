from __future__ import annotations

import json

import pytest

from kic_backend.data import DataError, load_training_pairs, read_split
from kic_backend.prompts import PROMPT_TEMPLATES, prompt_for


class TestPrompts:
    def test_templates_cycle_by_index(self):
        prompts = [prompt_for("cat", i) for i in range(7)]
        assert prompts[0] == PROMPT_TEMPLATES[0].replace("{prompt}", "cat")
        assert prompts[5] == prompts[0]
        assert prompts[6] == prompts[1]

    def test_keyword_substituted(self):
        assert "velvet" in prompt_for("velvet", 3)
        assert "{prompt}" not in prompt_for("velvet", 3)


class TestReadSplit:
    def test_reads_rows(self, toy_dataset_dir):
        rows = read_split(toy_dataset_dir / "train.jsonl")
        assert len(rows) == 10
        assert rows[0] == ("cat", "The cat sat on the mat.")

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(DataError, match="does not exist"):
            read_split(tmp_path / "nope.jsonl")

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "train.jsonl"
        path.write_text('{"keyword": "a", "context": "A a."}\nbroken\n')
        with pytest.raises(DataError, match=r"train\.jsonl:2"):
            read_split(path)

    def test_blank_keyword_names_line(self, tmp_path):
        path = tmp_path / "train.jsonl"
        path.write_text(json.dumps({"keyword": " ", "context": "x y z"}) + "\n")
        with pytest.raises(DataError, match=r"train\.jsonl:1"):
            read_split(path)


class TestTrainingPairs:
    def test_prompts_cycle_over_pairs(self, toy_dataset_dir):
        pairs = load_training_pairs(toy_dataset_dir)
        assert len(pairs) == 10
        first_prompt, first_target = pairs[0]
        assert first_prompt == PROMPT_TEMPLATES[0].replace("{prompt}", "cat")
        assert first_target == "The cat sat on the mat."
        # pair 5 wraps back to template 0, now for the other keyword
        assert pairs[5][0] == PROMPT_TEMPLATES[0].replace("{prompt}", "run")

    def test_missing_dataset_dir_names_path(self, tmp_path):
        with pytest.raises(DataError, match="dataset directory"):
            load_training_pairs(tmp_path / "missing")

    def test_empty_train_file_rejected(self, tmp_path):
        dataset_dir = tmp_path / "d"
        dataset_dir.mkdir()
        (dataset_dir / "train.jsonl").write_text("")
        with pytest.raises(DataError, match="no training pairs"):
            load_training_pairs(dataset_dir)
