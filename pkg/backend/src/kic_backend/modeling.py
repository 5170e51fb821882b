"""Model registry: hub names, local checkpoints, and an offline toy model.

``toy-t5`` is a seeded, randomly initialized tiny T5 over the byte-level
ByT5 tokenizer. It needs no downloaded files, trains in seconds on a
CPU, and exercises exactly the same tokenize/generate/save/load paths
as the real checkpoints, which makes it the model of choice for tests
and for environments without hub access.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import torch
import transformers
from transformers import (
    AutoConfig,
    AutoModelForCausalLM,
    AutoModelForSeq2SeqLM,
    AutoTokenizer,
    ByT5Tokenizer,
    T5Config,
    T5ForConditionalGeneration,
)

log = logging.getLogger(__name__)

transformers.logging.set_verbosity_error()
transformers.logging.disable_progress_bar()

TOY_MODEL = "toy-t5"
SEQ2SEQ_NAMES = {"t5-small", "t5-base", "t5-large"}
CAUSAL_NAMES = {"gpt2", "gpt2-medium", "gpt2-large"}


class ModelUnavailable(Exception):
    """The requested model cannot be loaded in this environment."""


@dataclass
class LoadedModel:
    tokenizer: object
    model: object
    model_id: str
    is_seq2seq: bool

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.model.parameters())


def build_toy_model(seed: int = 0) -> LoadedModel:
    tokenizer = ByT5Tokenizer()
    config = T5Config(
        vocab_size=len(tokenizer),
        d_model=64,
        d_kv=16,
        d_ff=128,
        num_layers=2,
        num_heads=4,
        decoder_start_token_id=tokenizer.pad_token_id,
    )
    torch.manual_seed(seed)
    model = T5ForConditionalGeneration(config)
    model.eval()
    return LoadedModel(
        tokenizer=tokenizer, model=model, model_id=TOY_MODEL, is_seq2seq=True
    )


def load_model(name_or_path: str, *, seed: int = 0) -> LoadedModel:
    """Load by registry name, hub name, or checkpoint directory.

    Raises:
        ModelUnavailable: unknown name, or the weights cannot be
            fetched (no cache and no hub access).
    """
    if name_or_path == TOY_MODEL:
        return build_toy_model(seed)

    path = Path(name_or_path)
    if path.is_dir():
        return _load_pretrained(str(path), model_id=path.name)

    if name_or_path in SEQ2SEQ_NAMES or name_or_path in CAUSAL_NAMES:
        return _load_pretrained(name_or_path, model_id=name_or_path)

    raise ModelUnavailable(
        f"unknown model {name_or_path!r}; expected {TOY_MODEL!r}, a known "
        f"hub name, or a checkpoint directory"
    )


def _load_pretrained(source: str, model_id: str) -> LoadedModel:
    try:
        config = AutoConfig.from_pretrained(source)
        tokenizer = AutoTokenizer.from_pretrained(source)
        if config.is_encoder_decoder:
            model = AutoModelForSeq2SeqLM.from_pretrained(source)
        else:
            model = AutoModelForCausalLM.from_pretrained(source)
            if tokenizer.pad_token_id is None:
                tokenizer.pad_token = tokenizer.eos_token
    except (OSError, ValueError) as exc:
        raise ModelUnavailable(
            f"cannot load {source!r} (no local files and no hub access?): {exc}"
        )
    model.eval()
    return LoadedModel(
        tokenizer=tokenizer,
        model=model,
        model_id=model_id,
        is_seq2seq=bool(config.is_encoder_decoder),
    )


def generate_text(loaded: LoadedModel, prompt: str, max_new_tokens: int) -> str:
    """Greedy generation; the raw decode is returned (echo handling is
    the caller's business, decoder-only models do echo their prompt)."""
    encoded = loaded.tokenizer(prompt, return_tensors="pt", truncation=True,
                               max_length=512)
    with torch.no_grad():
        output = loaded.model.generate(
            input_ids=encoded.input_ids,
            attention_mask=encoded.attention_mask,
            max_new_tokens=max_new_tokens,
            num_return_sequences=1,
            do_sample=False,
            num_beams=1,
            pad_token_id=loaded.tokenizer.pad_token_id,
        )
    return loaded.tokenizer.decode(output[0], skip_special_tokens=True)
