from __future__ import annotations

import click

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.management.cli import cli, experiment_command


@cli.command()
@experiment_command
def speed(cfg):
    """Direct and regeneration speed estimates at one bias."""
    result = experiment.speed(cfg)
    lines = [f"lambda = {result.lam:g}, n = {result.n_steps}"]
    for name, estimate in (("direct", result.direct), ("regen", result.regen)):
        if estimate is not None:
            lo, hi = estimate.ci
            lines.append(f"  {name:<7} {estimate.value:.6g} [{lo:.6g}, {hi:.6g}]")
    click.echo("\n".join(lines))
