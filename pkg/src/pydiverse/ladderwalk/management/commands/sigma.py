from __future__ import annotations

import click

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.management.cli import cli, experiment_command


@cli.command()
@experiment_command
def sigma(cfg):
    """Diffusivity of the unbiased walk from the path variance and from psi."""
    result = experiment.sigma(cfg)
    m = result.psi_moments
    click.echo(
        f"Var(X_n)/n = {result.path_variance.value:.6g}"
        f" +- {result.path_variance.se:.2g}\n"
        f"s11 = {m.s11:.6g} +- {m.se11:.2g}, s12 = {m.s12:.6g} +- {m.se12:.2g},"
        f" s22 = {m.s22:.6g} +- {m.se22:.2g}"
    )
