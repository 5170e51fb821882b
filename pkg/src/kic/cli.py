"""Single entry point for the whole pipeline.

Subcommands: harvest, build, eval, bot, serve-stub. Settings resolve
with flag > environment > config file > built-in default. Environment
variables use the ``KIC_`` prefix (``KIC_BUILD_SEED=7`` feeds
``kic build --seed``). The config file is flat ``section.key = value``
lines, where section is the subcommand and key is the flag name:

    harvest.top-m = 10
    build.seed = 7
    eval.reduction = best-of-prompts

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 chat
platform auth failure.
"""

from __future__ import annotations

import logging
import os
import signal
import sys
from pathlib import Path

import click

from . import __version__
from .errors import AuthError, KicError

log = logging.getLogger(__name__)

CONTEXT_SETTINGS = {
    "help_option_names": ["-h", "--help"],
    "max_content_width": 88,
    "terminal_width": 88,
}

def _option_registry(group: click.Group) -> dict[str, dict[str, click.Parameter]]:
    """Per subcommand: long option name (sans dashes) -> parameter."""
    registry: dict[str, dict[str, click.Parameter]] = {}
    for name, command in group.commands.items():
        options: dict[str, click.Parameter] = {}
        for param in command.params:
            for opt in getattr(param, "opts", ()):
                if opt.startswith("--"):
                    options[opt[2:]] = param
        registry[name] = options
    return registry


def _parse_config_file(path: str, group: click.Group) -> dict:
    """Flat ``section.key = value`` lines into a click default map.

    Sections are subcommand names, keys are their long flag names. Keys
    for repeatable flags may appear on several lines; each line appends
    one value.
    """
    registry = _option_registry(group)
    default_map: dict[str, dict] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{lineno}: expected 'section.key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if "." not in key:
            raise click.UsageError(
                f"{path}:{lineno}: key {key!r} needs a 'section.' prefix"
            )
        section, _, option = key.partition(".")
        param = registry.get(section, {}).get(option)
        if param is None:
            raise click.UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        target = default_map.setdefault(section, {})
        if getattr(param, "multiple", False):
            target.setdefault(param.name, []).append(value)
        else:
            target[param.name] = value
    return default_map


@click.group(context_settings=CONTEXT_SETTINGS)
@click.version_option(version=__version__, prog_name="kic")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Flat 'section.key = value' config file.",
)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, verbose: bool):
    """Keyword-in-context pipeline: harvest, build, eval, bot, serve-stub."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if config_path:
        ctx.default_map = _parse_config_file(config_path, cli)


@cli.command()
@click.option("--wordlist", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Keyword file, one word per line, '#' comments.")
@click.option("--top-m", default=10, show_default=True, type=int,
              help="Max context sentences per keyword.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output records file (JSON lines).")
@click.option("--base-url", default=None,
              help="Concordance page URL; '{word}' expands to the keyword.")
@click.option("--rate-limit", default=2.0, show_default=True, type=float,
              help="Global requests per second.")
@click.option("--timeout", default=10.0, show_default=True, type=float,
              help="Per-request timeout in seconds.")
@click.option("--max-retries", default=3, show_default=True, type=int,
              help="Extra attempts after a retryable failure.")
@click.option("--parallelism", default=4, show_default=True, type=int,
              help="Concurrent keyword fetches.")
@click.option("--skip-log", default=None, type=click.Path(dir_okay=False),
              help="Skip log path (default: <out>.skips.jsonl).")
def harvest(wordlist, top_m, out, base_url, rate_limit, timeout, max_retries,
            parallelism, skip_log):
    """Fetch concordance pages and extract example sentences."""
    from .harvest import HarvestConfig, harvest as run_harvest
    from .harvest import load_wordlist, write_records_jsonl, write_skips_jsonl

    words = load_wordlist(wordlist)
    kwargs = {
        "top_m": top_m,
        "rate_limit": rate_limit,
        "timeout": timeout,
        "max_retries": max_retries,
        "parallelism": parallelism,
    }
    if base_url:
        kwargs["base_url"] = base_url
    try:
        config = HarvestConfig(**kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    records, skips = run_harvest(words, config)
    write_records_jsonl(records, out)
    skip_path = skip_log or f"{out}.skips.jsonl"
    write_skips_jsonl(skips, skip_path)
    click.echo(
        f"harvested {len(records)} records from {len(words)} keywords "
        f"({len(skips)} skipped) -> {out}"
    )


def _parse_splits(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(piece) for piece in text.split(","))
    except ValueError:
        raise click.UsageError(f"--splits must be three comma-separated reals: {text!r}")
    if len(parts) != 3:
        raise click.UsageError(f"--splits needs exactly three fractions: {text!r}")
    total = sum(parts)
    if any(p <= 0 for p in parts):
        raise click.UsageError(f"--splits fractions must be positive: {text!r}")
    if abs(total - 1.0) > 1e-9:
        raise click.UsageError(f"--splits must sum to 1, got {total:g}")
    return parts


@cli.command()
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Harvest records file (JSON lines).")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False),
              help="Directory for split files and manifest.")
@click.option("--splits", default="0.8,0.1,0.1", show_default=True,
              help="train,val,test fractions; must sum to 1.")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed for the keyword-to-split assignment.")
def build(in_path, out_dir, splits, seed):
    """Deduplicate harvest records and write keyword-disjoint splits."""
    from .dataset import build_dataset, save_dataset
    from .harvest import read_records_jsonl

    fractions = _parse_splits(splits)
    records = read_records_jsonl(in_path)
    dataset, manifest = build_dataset(records, fractions, seed)
    save_dataset(dataset, manifest, out_dir)
    for warning in manifest.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(
        f"built dataset: {manifest.n_keywords} keywords, "
        f"counts {manifest.counts} -> {out_dir}"
    )


def _parse_backend(values, stub: bool) -> tuple[tuple[str, str], ...]:
    backends: list[tuple[str, str]] = []
    if stub:
        backends.append(("stub", "stub"))
    for value in values:
        name, sep, url = value.partition("=")
        if not sep or not name or not url:
            raise click.UsageError(f"--backend must look like id=url: {value!r}")
        backends.append((name, url))
    if not backends:
        raise click.UsageError("give at least one --backend id=url or --stub")
    return tuple(backends)


def _parse_params(values) -> dict[str, int]:
    params: dict[str, int] = {}
    for value in values:
        name, sep, count = value.partition("=")
        if not sep or not name or not count.isdigit():
            raise click.UsageError(f"--params must look like id=count: {value!r}")
        params[name] = int(count)
    return params


@cli.command(name="eval")
@click.option("--split", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Reference split file (JSON lines of keyword/context).")
@click.option("--backend", "backend_specs", multiple=True, metavar="ID=URL",
              help="Wire-protocol backend; repeatable.")
@click.option("--stub", is_flag=True, help="Also evaluate the in-process stub.")
@click.option("--report-dir", required=True, type=click.Path(file_okay=False),
              help="Reports land in a timestamped directory under this path.")
@click.option("--reduction", default="best-of-prompts", show_default=True,
              type=click.Choice(["best-of-prompts", "mean-of-prompts"]),
              help="How the five prompt scores become one keyword score.")
@click.option("--params", "param_specs", multiple=True, metavar="ID=COUNT",
              help="Parameter count per backend for the report; repeatable.")
def eval_cmd(split, backend_specs, stub, report_dir, reduction, param_specs):
    """Score backends against a reference split and write reports."""
    from .evaluation import EvalPlan, evaluate, render_report, write_run_dir

    plan = EvalPlan(
        split_path=split,
        backends=_parse_backend(backend_specs, stub),
        reduction=reduction,
    )
    outcome = evaluate(plan)
    params = _parse_params(param_specs)
    run_dir = write_run_dir(outcome, report_dir, params)
    click.echo(render_report(outcome.reports, params), nl=False)
    for backend_id, reason in outcome.failures:
        click.echo(f"failed backend {backend_id}: {reason}", err=True)
    click.echo(f"reports written to {run_dir}")


@cli.command()
@click.option("--store", "store_path", required=True, type=click.Path(dir_okay=False),
              help="Profile store file (versioned JSON).")
def bot(store_path):
    """Run the vocabulary bot (long polling).

    Needs BOT_TOKEN in the environment; BOT_API_BASE overrides the chat
    platform endpoint, which lets integration tests point the bot at a
    fake server.
    """
    from .bot.service import BotDeps, poll_loop
    from .bot.store import ProfileStore
    from .generation import StubBackend

    token = os.environ.get("BOT_TOKEN", "")
    if not token:
        raise click.UsageError("BOT_TOKEN is required in the environment")
    api_base = os.environ.get("BOT_API_BASE") or None
    backend_url = os.environ.get("KIC_BOT_BACKEND_URL", "")
    if backend_url:
        from .generation import HttpBackend

        backend = HttpBackend("bot-backend", backend_url)
    else:
        backend = StubBackend()
    deps = BotDeps(backend=backend, harvester=None)
    store = ProfileStore(store_path)
    kwargs = {"api_base": api_base} if api_base else {}
    click.echo(f"bot polling; store at {store_path}")
    poll_loop(token, deps, store, **kwargs)


@cli.command(name="serve-stub")
@click.option("--port", default=0, show_default=True, type=int,
              help="Listen port; 0 picks a free one.")
@click.option("--warmup-seconds", default=0.0, show_default=True, type=float,
              help="Answer 503 for this long after startup.")
def serve_stub(port, warmup_seconds):
    """Serve the deterministic stub backend over the wire protocol."""
    from .generation import StubBackend
    from .wireserver import BackendHttpServer

    import threading

    server = BackendHttpServer(
        StubBackend(), port=port, warmup_seconds=warmup_seconds
    )
    server.start()
    click.echo(f"stub backend listening on {server.base_url}")
    sys.stdout.flush()
    stop_event = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop_event.set())
    signal.signal(signal.SIGTERM, lambda *_: stop_event.set())
    stop_event.wait()
    server.stop()


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and translate outcomes into documented exit codes."""
    try:
        cli.main(
            args=argv,
            prog_name="kic",
            standalone_mode=False,
            auto_envvar_prefix="KIC",
        )
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except AuthError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except (KicError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
