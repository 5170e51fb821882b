"""CLI: ``kic-backend train`` and ``kic-backend serve``."""

from __future__ import annotations

import logging
import signal
import sys
import threading

import click

from . import __version__

CONTEXT_SETTINGS = {
    "help_option_names": ["-h", "--help"],
    "max_content_width": 88,
    "terminal_width": 88,
}


@click.group(context_settings=CONTEXT_SETTINGS)
@click.version_option(version=__version__, prog_name="kic-backend")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose: bool):
    """Train and serve generation models for the KIC toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--model", "model_name", default="toy-t5", show_default=True,
              help="Base model: toy-t5, t5-small, t5-base, or a checkpoint dir.")
@click.option("--dataset-dir", required=True, type=click.Path(file_okay=False),
              help="Directory holding builder-format split files.")
@click.option("--output-dir", required=True, type=click.Path(file_okay=False),
              help="Where the checkpoint and loss log land.")
@click.option("--epochs", default=10, show_default=True, type=int)
@click.option("--batch-size", default=128, show_default=True, type=int)
@click.option("--learning-rate", default=5e-5, show_default=True, type=float)
@click.option("--warmup-ratio", default=0.1, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--grad-accum-steps", default=1, show_default=True, type=int,
              help="Micro-batches per optimizer step.")
def train(model_name, dataset_dir, output_dir, epochs, batch_size, learning_rate,
          warmup_ratio, seed, grad_accum_steps):
    """Fine-tune a seq2seq model on a built dataset."""
    from .training import TrainSpec, train as run_train

    spec = TrainSpec(
        model_name=model_name,
        dataset_dir=dataset_dir,
        output_dir=output_dir,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        warmup_ratio=warmup_ratio,
        seed=seed,
        grad_accum_steps=grad_accum_steps,
    )
    result = run_train(spec)
    click.echo(
        f"trained {epochs} epochs; losses "
        + " -> ".join(f"{loss:.4f}" for loss in result.losses)
    )
    click.echo(f"checkpoint at {result.checkpoint_dir}")


@cli.command()
@click.option("--model", "model_name", default="toy-t5", show_default=True,
              help="Model name or checkpoint directory to serve.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=0, show_default=True, type=int,
              help="Listen port; 0 picks a free one.")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed for randomly initialized registry models.")
def serve(model_name, host, port, seed):
    """Serve a model over the generation wire protocol."""
    from .server import ModelServer

    server = ModelServer(model_name, host=host, port=port, seed=seed)
    server.start()
    click.echo(f"model backend listening on {server.base_url}")
    sys.stdout.flush()
    stop_event = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop_event.set())
    signal.signal(signal.SIGTERM, lambda *_: stop_event.set())
    stop_event.wait()
    server.stop()


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="kic-backend", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except Exception as exc:  # runtime failures: one-line cause, no trace
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
