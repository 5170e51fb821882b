"""Fine-tune a seq2seq model on a built dataset.

Adam with a linear warmup/decay schedule (warmup ratio 0.1 of total
steps by default), 10 epochs, batch size 128, learning rate 5e-5 as the
out-of-the-box settings. Every knob is a TrainSpec field. Runs are
seed-reproducible on one machine: the seed fixes initialization (for
the toy model), batch shuffling, and therefore the loss log.
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset
from transformers import get_linear_schedule_with_warmup

from .data import DataError, load_training_pairs
from .modeling import LoadedModel, ModelUnavailable, load_model

log = logging.getLogger(__name__)


@dataclass
class TrainSpec:
    model_name: str
    dataset_dir: str
    output_dir: str
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 5e-5
    warmup_ratio: float = 0.1
    seed: int = 0
    grad_accum_steps: int = 1
    max_input_tokens: int = 128
    max_target_tokens: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ValueError("warmup_ratio must be in [0, 1]")


@dataclass
class TrainResult:
    checkpoint_dir: Path
    losses: list[float] = field(default_factory=list)


class _PairDataset(Dataset):
    def __init__(self, pairs: list[tuple[str, str]]):
        self.pairs = pairs

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, index):
        return self.pairs[index]


def _collate(loaded: LoadedModel, spec: TrainSpec):
    tokenizer = loaded.tokenizer

    def collate(batch: list[tuple[str, str]]):
        prompts = [prompt for prompt, _ in batch]
        targets = [target for _, target in batch]
        inputs = tokenizer(
            prompts,
            padding=True,
            truncation=True,
            max_length=spec.max_input_tokens,
            return_tensors="pt",
        )
        labels = tokenizer(
            targets,
            padding=True,
            truncation=True,
            max_length=spec.max_target_tokens,
            return_tensors="pt",
        ).input_ids
        labels[labels == tokenizer.pad_token_id] = -100
        return inputs.input_ids, inputs.attention_mask, labels

    return collate


def train(spec: TrainSpec) -> TrainResult:
    """Run the fine-tune and save checkpoint plus per-epoch loss log.

    Raises:
        DataError: dataset directory or files fail validation.
        ModelUnavailable: the base model cannot be loaded, or it is not
            a seq2seq model (decoder-only baselines are serve-only).
    """
    pairs = load_training_pairs(spec.dataset_dir)
    torch.manual_seed(spec.seed)
    random.seed(spec.seed)
    loaded = load_model(spec.model_name, seed=spec.seed)
    if not loaded.is_seq2seq:
        raise ModelUnavailable(
            f"{spec.model_name!r} is a decoder-only model; training here "
            f"supports seq2seq models, decoder-only baselines are serve-only"
        )

    generator = torch.Generator().manual_seed(spec.seed)
    dataloader = DataLoader(
        _PairDataset(pairs),
        batch_size=spec.batch_size,
        shuffle=True,
        generator=generator,
        collate_fn=_collate(loaded, spec),
    )
    steps_per_epoch = max(1, -(-len(pairs) // spec.batch_size))
    total_steps = max(1, steps_per_epoch * spec.epochs // spec.grad_accum_steps)
    optimizer = torch.optim.Adam(loaded.model.parameters(), lr=spec.learning_rate)
    scheduler = get_linear_schedule_with_warmup(
        optimizer,
        num_warmup_steps=int(spec.warmup_ratio * total_steps),
        num_training_steps=total_steps,
    )

    model = loaded.model
    model.train()
    losses: list[float] = []
    started = time.monotonic()
    try:
        for epoch in range(spec.epochs):
            epoch_loss = 0.0
            batches = 0
            optimizer.zero_grad()
            for step, (input_ids, attention_mask, labels) in enumerate(dataloader):
                outputs = model(
                    input_ids=input_ids,
                    attention_mask=attention_mask,
                    labels=labels,
                )
                loss = outputs.loss / spec.grad_accum_steps
                loss.backward()
                if (step + 1) % spec.grad_accum_steps == 0:
                    optimizer.step()
                    scheduler.step()
                    optimizer.zero_grad()
                epoch_loss += float(outputs.loss.detach())
                batches += 1
            mean_loss = epoch_loss / batches
            losses.append(mean_loss)
            log.info("epoch %d/%d: loss %.6f", epoch + 1, spec.epochs, mean_loss)
    except RuntimeError as exc:
        if "memory" in str(exc).lower():
            log.error(
                "ran out of memory; reduce --batch-size (currently %d) or "
                "raise --grad-accum-steps to keep the effective batch",
                spec.batch_size,
            )
        raise
    elapsed = time.monotonic() - started

    model.eval()
    checkpoint_dir = Path(spec.output_dir)
    checkpoint_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(checkpoint_dir)
    loaded.tokenizer.save_pretrained(checkpoint_dir)
    loss_log = {
        "model": spec.model_name,
        "seed": spec.seed,
        "epochs": spec.epochs,
        "batch_size": spec.batch_size,
        "learning_rate": spec.learning_rate,
        "warmup_ratio": spec.warmup_ratio,
        "pairs": len(pairs),
        "losses": losses,
    }
    with (checkpoint_dir / "loss_log.json").open("w", encoding="utf-8") as handle:
        json.dump(loss_log, handle, indent=2)
        handle.write("\n")
    log.info(
        "saved checkpoint to %s after %.1fs (%d pairs)",
        checkpoint_dir,
        elapsed,
        len(pairs),
    )
    return TrainResult(checkpoint_dir=checkpoint_dir, losses=losses)
