from __future__ import annotations

import logging

import click

from pydiverse.ladderwalk.core.selftest import CHECKS, run_selftest
from pydiverse.ladderwalk.errors import OracleFailure
from pydiverse.ladderwalk.management.cli import cli, library_errors
from pydiverse.ladderwalk.util.structlog import setup_logging


@cli.command()
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option(
    "--check",
    "checks",
    multiple=True,
    type=click.Choice([name for name, _ in CHECKS]),
    help="run only this check (may be repeated)",
)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
    default="WARNING",
    show_default=True,
)
def selftest(seed: int, checks: tuple[str, ...], log_level: str):
    """Run the exact identity checks; stops at the first one that fails."""
    setup_logging(log_level=getattr(logging, log_level))
    try:
        with library_errors():
            results = run_selftest(seed, list(checks) or None)
    except OracleFailure as e:
        raise click.ClickException(f"check {e.check!r} failed: {e}") from e
    for result in results:
        click.echo(
            f"{result.name:<14} ok  ({result.residual:.2e} <= {result.tolerance:.0e})"
        )
