from __future__ import annotations

import click

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.management.cli import cli, experiment_command


@cli.command()
@experiment_command
@click.option(
    "--envs", type=click.IntRange(min=1), help="environments per (lambda, L, R)"
)
def hitting_check(cfg, envs: int | None):
    """
    Compare exact hitting probabilities with their closed form brackets.

    Exits with status 1 if a value in the small bias regime lies outside its
    bracket.
    """
    frame = experiment.hitting_check(cfg, envs)
    outside = frame[frame["in_regime"] & ~frame["inside"]]
    click.echo(f"{len(frame) - len(outside)} of {len(frame)} values inside.")
    if len(outside):
        raise click.ClickException(
            f"{len(outside)} hitting probabilities outside of their bracket"
        )
