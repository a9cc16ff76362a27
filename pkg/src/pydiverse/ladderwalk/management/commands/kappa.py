from __future__ import annotations

import click

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.management.cli import cli, experiment_command


@cli.command()
@experiment_command
def kappa(cfg):
    """Estimate kappa from a pool of harvested cycles."""
    estimate = experiment.kappa(cfg)
    lo, hi = estimate.ci
    click.echo(
        f"kappa = {estimate.value:.6g} +- {estimate.se:.2g}"
        f" [{lo:.6g}, {hi:.6g}] from {estimate.n_cycles} cycles"
    )
