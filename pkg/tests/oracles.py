"""Independent brute-force reference implementations for the metrics.

Deliberately naive: n-grams are enumerated as slices and matched by
removal from a mutable copy of the reference list, the aligner scans
quadratically, and the chunk counter walks the match pairs one by one.
Nothing here shares code with kic.metrics.
"""

from __future__ import annotations

import math


def brute_ngram_precision(pred: list[str], ref: list[str], n: int) -> float:
    pred_ngrams = [tuple(pred[i : i + n]) for i in range(len(pred) - n + 1)]
    if not pred_ngrams:
        return 0.0
    ref_ngrams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
    pool = list(ref_ngrams)
    hits = 0
    for gram in pred_ngrams:
        if gram in pool:
            pool.remove(gram)
            hits += 1
    return hits / len(pred_ngrams)


def brute_bleu(
    pred: list[str],
    ref: list[str],
    max_order: int = 4,
    weights: list[float] | None = None,
) -> float:
    if not ref:
        raise ValueError("empty reference")
    if not pred:
        return 0.0
    if weights is None:
        weights = [1.0 / max_order] * max_order
    brevity = min(1.0, len(pred) / len(ref))
    orders = min(max_order, len(pred))
    total_weight = sum(weights[:orders])
    acc = 0.0
    for n in range(1, orders + 1):
        p = brute_ngram_precision(pred, ref, n)
        if p == 0.0:
            return 0.0
        acc += (weights[n - 1] / total_weight) * math.log(p)
    return brevity * math.exp(acc)


def brute_align(pred: list[str], ref: list[str]) -> tuple[int, int]:
    """Greedy earliest-unmatched alignment; returns (matches, chunks)."""
    taken = [False] * len(ref)
    pairs = []
    for i, token in enumerate(pred):
        for j, ref_token in enumerate(ref):
            if not taken[j] and ref_token == token:
                taken[j] = True
                pairs.append((i, j))
                break
    if not pairs:
        return 0, 0
    chunks = 0
    previous = None
    for pair in pairs:
        if previous is None or pair != (previous[0] + 1, previous[1] + 1):
            chunks += 1
        previous = pair
    return len(pairs), chunks


def brute_meteor(
    pred: list[str],
    ref: list[str],
    alpha: float = 0.9,
    gamma: float = 0.5,
    beta: float = 3.0,
) -> float:
    matches, chunks = brute_align(pred, ref)
    if matches == 0:
        return 0.0
    precision = matches / len(pred)
    recall = matches / len(ref)
    penalty = gamma * (chunks / matches) ** beta
    fmean = (recall * precision) / (alpha * recall + (1 - alpha) * precision)
    return min(1.0, max(0.0, (1 - penalty) * fmean))
