from __future__ import annotations

import click

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.management.cli import cli, experiment_command


@cli.command()
@experiment_command
@click.option("--windows", type=click.IntRange(min=1), help="number of windows")
def sample_env(cfg, windows: int | None):
    """Sample conditioned windows and write their decomposition statistics."""
    frame = experiment.sample_env(cfg, windows)
    click.echo(f"Wrote {len(frame)} windows to {cfg.out_dir}.")
