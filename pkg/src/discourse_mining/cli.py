"""Command line: ``discourse-mining <command> --config run.cfg``.

Commands
--------
ingest     Parse transcripts into per-session files and per-community corpora.
topics     Fit one LDA model per community and summarize its topics.
sentiment  Build the lexicon, train the classifier and score every sentence.
report     Aggregate scores into speaker, topic and mode reports.
run        All of the above, as one Prefect flow run.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import functools
import logging
import sys
from typing import Any, Callable

import click

from discourse_mining.config import PipelineConfig, validate_config
from discourse_mining.exception import DiscourseMiningException
from discourse_mining.pipeline import INGEST, REPORT, SENTIMENT, TOPICS, run_pipeline, run_stage

INTERNAL_ERROR = 4


def _common_options(fn: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option(
            "--config",
            "config_path",
            required=True,
            type=click.Path(dir_okay=False),
            help="Pipeline configuration file (key = value).",
        ),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                     help="Override the configured global seed."),
        click.option("--output", type=click.Path(file_okay=False), default=None,
                     help="Override the configured output directory."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None,
                     help="Report format (overrides the config)."),
        click.option(
            "--log-level",
            type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
            default="INFO",
            show_default=True,
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _load(config_path: str, seed: int | None, output: str | None, fmt: str | None) -> PipelineConfig:
    overrides: dict[str, str] = {}
    if seed is not None:
        overrides["seed"] = str(seed)
    if output is not None:
        overrides["output"] = output
    if fmt is not None:
        overrides["format"] = fmt
    return validate_config(config_path, overrides)


def _handle_errors(fn: Callable[..., Any]) -> Callable[..., Any]:
    """Turn toolkit exceptions into ``headline: message`` on stderr and an exit code."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except DiscourseMiningException as exc:
            click.echo("%s: %s" % (exc.headline, exc), err=True)
            sys.exit(exc.exit_code)
        except (click.exceptions.Exit, click.ClickException, SystemExit):
            raise
        except Exception as exc:
            click.echo("Internal error: %s: %s" % (type(exc).__name__, exc), err=True)
            sys.exit(INTERNAL_ERROR)

    return wrapper


def _stage_command(name: str, help_text: str) -> None:
    @cli.command(name=name, help=help_text)
    @_common_options
    @_handle_errors
    def command(config_path: str, seed: int | None, output: str | None, fmt: str | None, log_level: str) -> None:
        logging.getLogger("prefect").setLevel(log_level.upper())
        config = _load(config_path, seed, output, fmt)
        run_stage(name, config)
        click.echo("%s stage finished; artifacts in %s" % (name, config.output))


@click.group()
@click.version_option(package_name="discourse-mining")
def cli() -> None:
    """Topic and sentiment mining for focus-group transcripts."""


_stage_command(INGEST, "Parse transcripts and write per-community corpora.")
_stage_command(TOPICS, "Fit per-community topic models from the ingested corpora.")
_stage_command(SENTIMENT, "Build the lexicon, train the classifier and score sentences.")
_stage_command(REPORT, "Aggregate sentence scores into report files.")


@cli.command(help="Run every stage as one Prefect flow.")
@_common_options
@_handle_errors
def run(config_path: str, seed: int | None, output: str | None, fmt: str | None, log_level: str) -> None:
    logging.getLogger("prefect").setLevel(log_level.upper())
    config = _load(config_path, seed, output, fmt)
    run_pipeline(config)
    click.echo("Report bundle written to %s" % config.output)


if __name__ == "__main__":
    cli()
