from __future__ import annotations

import click

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.management.cli import cli, experiment_command


@cli.command()
@experiment_command
def einstein(cfg):
    """Speeds on the bias grid against the diffusivity, written as einstein.json."""
    report = experiment.einstein(cfg)
    verdict = report.verdict
    click.echo(
        f"trend: {verdict.trend}, bounded: {verdict.bounded},"
        f" overlap: {verdict.overlap}, positive: {verdict.positive}"
    )
