"""Evaluate generation backends against a reference split.

For every backend and every unique keyword in the split, the runner
asks the backend for its five prompt generations, scores each one with
BLEU and METEOR against every reference context for that keyword (max
over references, per metric), reduces the five per-generation scores to
one per keyword, and averages over keywords. Backends fail
independently: one unreachable server never touches another server's
report.

Two reduction policies exist. ``best-of-prompts`` (default) keeps the
generation with the highest BLEU, breaks ties toward the lowest prompt
index, and lets that generation's METEOR travel with it.
``mean-of-prompts`` averages all five.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .dataset import load_pairs
from .errors import BackendUnreachable, EmptySplit
from .generation import HttpBackend, StubBackend, generate_batch
from .metrics import BleuConfig, MeteorConfig, bleu, meteor, tokenize

log = logging.getLogger(__name__)

REDUCTION_BEST = "best-of-prompts"
REDUCTION_MEAN = "mean-of-prompts"
REDUCTIONS = (REDUCTION_BEST, REDUCTION_MEAN)

REFERENCE_MAX = "max-over-references"

STUB_TARGET = "stub"

MEAN_PROMPT_INDEX = -1  # chosen_prompt_index sentinel under mean-of-prompts


@dataclass(frozen=True)
class KeywordScore:
    keyword: str
    best_bleu: float
    best_meteor: float
    chosen_prompt_index: int

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword,
            "best_bleu": self.best_bleu,
            "best_meteor": self.best_meteor,
            "chosen_prompt_index": self.chosen_prompt_index,
        }


@dataclass
class MetricReport:
    backend_id: str
    avg_bleu: float
    avg_meteor: float
    n_keywords: int
    per_keyword: list[KeywordScore] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "avg_bleu": self.avg_bleu,
            "avg_meteor": self.avg_meteor,
            "n_keywords": self.n_keywords,
            "per_keyword": [score.to_dict() for score in self.per_keyword],
        }


@dataclass(frozen=True)
class EvalPlan:
    """What to evaluate: a split, backends, metric configs, policies."""

    split_path: str
    backends: tuple[tuple[str, str], ...]  # (backend_id, "stub" or base URL)
    bleu_cfg: BleuConfig = BleuConfig()
    meteor_cfg: MeteorConfig = MeteorConfig()
    reduction: str = REDUCTION_BEST
    reference_policy: str = REFERENCE_MAX
    parallelism: int = 1

    def __post_init__(self):
        if not self.backends:
            raise ValueError("at least one backend is required")
        if self.reduction not in REDUCTIONS:
            raise ValueError(
                f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}"
            )
        if self.reference_policy != REFERENCE_MAX:
            raise ValueError(
                f"unsupported reference policy: {self.reference_policy!r}"
            )
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass
class EvalOutcome:
    reports: list[MetricReport]
    failures: list[tuple[str, str]] = field(default_factory=list)


def make_backend(backend_id: str, target: str):
    if target == STUB_TARGET:
        return StubBackend()
    return HttpBackend(backend_id, target)


def _score_keyword(
    keyword: str,
    references: list[list[str]],
    backend,
    bleu_cfg: BleuConfig,
    meteor_cfg: MeteorConfig,
    reduction: str,
) -> KeywordScore:
    batch = generate_batch(keyword, backend)
    scored: list[tuple[float, float]] = []
    for _, sentence in batch.generations:
        pred_tokens = tokenize(sentence)
        best_b = max(bleu(pred_tokens, ref, bleu_cfg) for ref in references)
        best_m = max(meteor(pred_tokens, ref, meteor_cfg) for ref in references)
        scored.append((best_b, best_m))
    if reduction == REDUCTION_MEAN:
        return KeywordScore(
            keyword=keyword,
            best_bleu=sum(b for b, _ in scored) / len(scored),
            best_meteor=sum(m for _, m in scored) / len(scored),
            chosen_prompt_index=MEAN_PROMPT_INDEX,
        )
    chosen = max(range(len(scored)), key=lambda i: (scored[i][0], -i))
    return KeywordScore(
        keyword=keyword,
        best_bleu=scored[chosen][0],
        best_meteor=scored[chosen][1],
        chosen_prompt_index=chosen,
    )


def _evaluate_backend(
    backend,
    refs_by_keyword: dict[str, list[list[str]]],
    plan: EvalPlan,
) -> MetricReport:
    keywords = list(refs_by_keyword)

    def score(keyword: str) -> KeywordScore:
        return _score_keyword(
            keyword,
            refs_by_keyword[keyword],
            backend,
            plan.bleu_cfg,
            plan.meteor_cfg,
            plan.reduction,
        )

    if plan.parallelism > 1:
        with ThreadPoolExecutor(max_workers=plan.parallelism) as pool:
            per_keyword = list(pool.map(score, keywords))
    else:
        per_keyword = [score(keyword) for keyword in keywords]

    n = len(per_keyword)
    return MetricReport(
        backend_id=backend.backend_id,
        avg_bleu=sum(s.best_bleu for s in per_keyword) / n,
        avg_meteor=sum(s.best_meteor for s in per_keyword) / n,
        n_keywords=n,
        per_keyword=per_keyword,
    )


def evaluate(plan: EvalPlan) -> EvalOutcome:
    """Run the whole plan. Unreachable backends become recorded failures.

    Raises:
        EmptySplit: the split file holds no pairs.
    """
    pairs = load_pairs(plan.split_path)
    if not pairs:
        raise EmptySplit(f"no pairs in {plan.split_path}")

    refs_by_keyword: dict[str, list[list[str]]] = {}
    for pair in pairs:
        tokens = tokenize(pair.context)
        if not tokens:
            continue
        refs_by_keyword.setdefault(pair.keyword, []).append(tokens)
    if not refs_by_keyword:
        raise EmptySplit(f"no usable references in {plan.split_path}")

    outcome = EvalOutcome(reports=[])
    for backend_id, target in plan.backends:
        backend = make_backend(backend_id, target)
        try:
            report = _evaluate_backend(backend, refs_by_keyword, plan)
        except BackendUnreachable as exc:
            log.warning("backend %r unreachable: %s", backend_id, exc)
            outcome.failures.append((backend_id, str(exc)))
            continue
        report.backend_id = backend_id
        outcome.reports.append(report)
    return outcome


def _format_params(count: int | None) -> str:
    if count is None:
        return "-"
    if count >= 1_000_000:
        return f"{count / 1_000_000:g} million"
    return str(count)


def render_report(
    reports: list[MetricReport], param_counts: dict[str, int] | None = None
) -> str:
    """Human-readable comparison table, scores to four decimals."""
    param_counts = param_counts or {}
    header = ("Model", "BLEU", "METEOR", "Number of Parameters")
    rows = [
        (
            report.backend_id,
            f"{report.avg_bleu:.4f}",
            f"{report.avg_meteor:.4f}",
            _format_params(param_counts.get(report.backend_id)),
        )
        for report in reports
    ]
    widths = [
        max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
        for i in range(4)
    ]
    lines = [
        "  ".join(header[i].ljust(widths[i]) for i in range(4)).rstrip(),
        "  ".join("-" * widths[i] for i in range(4)).rstrip(),
    ]
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(4)).rstrip())
    return "\n".join(lines) + "\n"


def report_json(
    outcome: EvalOutcome, param_counts: dict[str, int] | None = None
) -> dict:
    param_counts = param_counts or {}
    return {
        "reports": [
            {**report.to_dict(), "param_count": param_counts.get(report.backend_id)}
            for report in outcome.reports
        ],
        "failures": [
            {"backend_id": backend_id, "reason": reason}
            for backend_id, reason in outcome.failures
        ],
    }


def write_run_dir(
    outcome: EvalOutcome,
    report_dir: str | Path,
    param_counts: dict[str, int] | None = None,
    *,
    clock: Callable[[], datetime] | None = None,
) -> Path:
    """Write report.txt and report.json into a timestamped run directory."""
    moment = clock() if clock is not None else datetime.now(timezone.utc)
    stamp = moment.strftime("%Y%m%d-%H%M%S")
    base = Path(report_dir)
    run_dir = base / f"run-{stamp}"
    suffix = 1
    while run_dir.exists():
        run_dir = base / f"run-{stamp}-{suffix}"
        suffix += 1
    run_dir.mkdir(parents=True)
    (run_dir / "report.txt").write_text(
        render_report(outcome.reports, param_counts), encoding="utf-8"
    )
    with (run_dir / "report.json").open("w", encoding="utf-8") as handle:
        json.dump(report_json(outcome, param_counts), handle, indent=2)
        handle.write("\n")
    return run_dir
