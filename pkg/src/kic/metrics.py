"""Sentence-level BLEU and METEOR over one canonical tokenizer.

Every metric in the package consumes token lists produced by
:func:`tokenize`; nothing else tokenizes text. BLEU here multiplies a
length-ratio factor capped at 1 with the exponential of the weighted
log n-gram precisions. METEOR is the weighted fraction mean of unigram
precision and recall, discounted by a fragmentation penalty computed
from match chunks.

Two deliberate properties of this BLEU variant, both configurable only
in the sense that they fall out of the formula:

- the length factor is min(1, len(prediction) / len(reference)), not an
  exponential brevity penalty;
- any zero n-gram precision over the effective orders zeroes the score
  (no smoothing).

For predictions shorter than ``max_order`` the effective order set is
truncated to the prediction length and the weights are renormalized to
sum to 1 over those orders, so a two-token prediction is judged on
unigrams and bigrams instead of scoring 0 unconditionally.

METEOR's fraction mean places ``alpha`` on recall and ``1 - alpha`` on
precision, which is the transposed form of the more common
parameterization; callers who want the textbook weighting can pass
``1 - alpha``.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyReference

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Case-fold and split into word tokens and standalone punctuation.

    Runs of word characters become one token each; every other
    non-whitespace character becomes its own token. All whitespace,
    Unicode included, only separates.

    >>> tokenize("The cat, sat.")
    ['the', 'cat', ',', 'sat', '.']
    """
    return _TOKEN_RE.findall(text.casefold())


@dataclass(frozen=True)
class BleuConfig:
    """Maximum n-gram order and per-order weights (must sum to 1)."""

    max_order: int = 4
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError(f"max_order must be >= 1, got {self.max_order}")
        if not self.weights:
            object.__setattr__(
                self, "weights", (1.0 / self.max_order,) * self.max_order
            )
        if len(self.weights) != self.max_order:
            raise ValueError(
                f"need {self.max_order} weights, got {len(self.weights)}"
            )
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(self.weights)!r}")


@dataclass(frozen=True)
class MeteorConfig:
    """Recall weight plus the fragmentation penalty coefficients.

    The penalty is ``penalty_gamma * (chunks / matches) ** penalty_beta``.
    """

    alpha: float = 0.9
    penalty_gamma: float = 0.5
    penalty_beta: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.penalty_gamma < 0:
            raise ValueError("penalty_gamma must be >= 0")
        if self.penalty_beta < 0:
            raise ValueError("penalty_beta must be >= 0")


@dataclass
class SentenceScore:
    """All per-sentence metric components for one (prediction, reference)."""

    bleu: float
    meteor: float
    ngram_precisions: list[float] = field(default_factory=list)
    match_count: int = 0
    chunk_count: int = 0

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "meteor": self.meteor,
            "ngram_precisions": list(self.ngram_precisions),
            "match_count": self.match_count,
            "chunk_count": self.chunk_count,
        }


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def ngram_precision(prediction: list[str], reference: list[str], n: int) -> float:
    """Clipped n-gram precision.

    Each predicted n-gram is credited at most as many times as it occurs
    in the reference. Returns 0.0 when the prediction has no n-grams of
    order ``n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    pred_counts = _ngram_counts(prediction, n)
    total = sum(pred_counts.values())
    if total == 0:
        return 0.0
    ref_counts = _ngram_counts(reference, n)
    clipped = sum(min(count, ref_counts[gram]) for gram, count in pred_counts.items())
    return clipped / total


def bleu(
    prediction: list[str],
    reference: list[str],
    config: BleuConfig = BleuConfig(),
) -> float:
    """Length-capped BLEU over clipped n-gram precisions.

    Score is ``min(1, len(pred)/len(ref)) * exp(sum_n w_n log p_n)`` with
    the order set truncated to the prediction length and the weights
    renormalized over the surviving orders. Any surviving ``p_n == 0``
    makes the whole score 0. An empty prediction scores 0.

    Raises:
        EmptyReference: if the reference has no tokens.
    """
    if not reference:
        raise EmptyReference("cannot score against an empty reference")
    if not prediction:
        return 0.0
    brevity = min(1.0, len(prediction) / len(reference))
    orders = min(config.max_order, len(prediction))
    scale = sum(config.weights[:orders])
    log_sum = 0.0
    for n in range(1, orders + 1):
        p_n = ngram_precision(prediction, reference, n)
        if p_n == 0.0:
            return 0.0
        log_sum += (config.weights[n - 1] / scale) * math.log(p_n)
    return brevity * math.exp(log_sum)


def align_unigrams(
    prediction: list[str], reference: list[str]
) -> tuple[int, int, float, float]:
    """Greedy exact-match unigram alignment.

    Walks the prediction left to right and matches each token to the
    earliest still-unmatched identical reference token. Returns
    ``(match_count, chunk_count, precision, recall)`` where a chunk is a
    maximal run of matches that is contiguous and identically ordered in
    both sequences. Either side being empty yields all zeros.
    """
    positions: dict[str, list[int]] = {}
    for j, token in enumerate(reference):
        positions.setdefault(token, []).append(j)
    next_free = {token: 0 for token in positions}

    pairs: list[tuple[int, int]] = []
    for i, token in enumerate(prediction):
        slots = positions.get(token)
        if slots is None:
            continue
        cursor = next_free[token]
        if cursor < len(slots):
            pairs.append((i, slots[cursor]))
            next_free[token] = cursor + 1

    matches = len(pairs)
    if matches == 0:
        return 0, 0, 0.0, 0.0
    chunks = 1
    for (prev_i, prev_j), (cur_i, cur_j) in zip(pairs, pairs[1:]):
        if cur_i != prev_i + 1 or cur_j != prev_j + 1:
            chunks += 1
    precision = matches / len(prediction)
    recall = matches / len(reference)
    return matches, chunks, precision, recall


def meteor(
    prediction: list[str],
    reference: list[str],
    config: MeteorConfig = MeteorConfig(),
) -> float:
    """Fraction mean of unigram precision/recall with a chunk penalty.

    ``(1 - penalty) * (recall * precision) / (alpha * recall +
    (1 - alpha) * precision)`` where the penalty is
    ``gamma * (chunks / matches) ** beta``. Zero matches score 0. The
    result is clamped into [0, 1].
    """
    matches, chunks, precision, recall = align_unigrams(prediction, reference)
    if matches == 0:
        return 0.0
    penalty = config.penalty_gamma * (chunks / matches) ** config.penalty_beta
    fmean = (recall * precision) / (
        config.alpha * recall + (1.0 - config.alpha) * precision
    )
    score = (1.0 - penalty) * fmean
    return min(1.0, max(0.0, score))


def score_pair(
    prediction: str,
    reference: str,
    bleu_cfg: BleuConfig = BleuConfig(),
    meteor_cfg: MeteorConfig = MeteorConfig(),
) -> SentenceScore:
    """Tokenize both sides once and compute every metric component.

    Raises:
        EmptyReference: if the reference tokenizes to nothing.
    """
    pred_tokens = tokenize(prediction)
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise EmptyReference("reference tokenizes to an empty sequence")
    matches, chunks, _, _ = align_unigrams(pred_tokens, ref_tokens)
    precisions = [
        ngram_precision(pred_tokens, ref_tokens, n)
        for n in range(1, bleu_cfg.max_order + 1)
    ]
    return SentenceScore(
        bleu=bleu(pred_tokens, ref_tokens, bleu_cfg),
        meteor=meteor(pred_tokens, ref_tokens, meteor_cfg),
        ngram_precisions=precisions,
        match_count=matches,
        chunk_count=chunks,
    )
