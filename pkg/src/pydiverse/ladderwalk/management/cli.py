from __future__ import annotations

import contextlib
import functools
import importlib
import logging
import pkgutil
from pathlib import Path

import click

from pydiverse.ladderwalk.core.config import ExperimentConfig, LadderwalkConfig
from pydiverse.ladderwalk.errors import (
    ConfigError,
    ConnectivityError,
    CycleSourceError,
    FeasibilityError,
    InsufficientDataError,
    NetworkError,
    ParameterError,
    PreconditionError,
    WalkBoundaryError,
    WindowFormatError,
)
from pydiverse.ladderwalk.util.structlog import setup_logging

LIBRARY_ERRORS = (
    ConfigError,
    ConnectivityError,
    CycleSourceError,
    FeasibilityError,
    InsufficientDataError,
    NetworkError,
    ParameterError,
    PreconditionError,
    WalkBoundaryError,
    WindowFormatError,
)


@click.group()
def cli():
    pass


def experiment_options(f):
    """Options shared by all experiment commands; they override the config file."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False),
            help="path of the ladderwalk config file to use",
        ),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="master seed"),
        click.option(
            "--out", type=click.Path(file_okay=False), help="output directory"
        ),
        click.option("--threads", type=click.IntRange(min=1), help="worker processes"),
        click.option(
            "--p",
            "p",
            type=click.FloatRange(0, 1, min_open=True, max_open=True),
            help="edge probability",
        ),
        click.option("--lambda", "lam", type=click.FloatRange(min=0), help="bias"),
        click.option("--alpha", type=click.FloatRange(min=0, min_open=True)),
        click.option("--replicas", type=click.IntRange(min=1)),
        click.option(
            "--log-level",
            type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
            default="INFO",
            show_default=True,
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def load_config(
    config_path: str | None = None, log_level: str = "INFO", **overrides
) -> ExperimentConfig:
    setup_logging(log_level=getattr(logging, log_level))
    with library_errors():
        if config_path:
            ladderwalk_config = LadderwalkConfig(path=config_path)
        else:
            ladderwalk_config = LadderwalkConfig.default()
        return ladderwalk_config.get(**overrides)


@contextlib.contextmanager
def library_errors():
    """Turn the errors of an experiment into a click error with exit status 1."""
    try:
        yield
    except ConfigError as e:
        raise click.ClickException(f"config error: {e}") from e
    except LIBRARY_ERRORS as e:
        raise click.ClickException(f"{type(e).__name__}: {e}") from e


def experiment_command(f):
    """Wrap a command body ``f(cfg, **rest)`` so it receives a loaded config."""

    @functools.wraps(f)
    def wrapper(
        config_path, seed, out, threads, p, lam, alpha, replicas, log_level, **rest
    ):
        cfg = load_config(
            config_path,
            log_level,
            seed=seed,
            out=out,
            threads=threads,
            p=p,
            lam=lam,
            alpha=alpha,
            replicas=replicas,
        )
        with library_errors():
            return f(cfg, **rest)

    return experiment_options(wrapper)


def find_commands():
    commands_dir = Path(__file__).parent / "commands"
    return [
        name
        for _, name, ispkg in pkgutil.iter_modules([str(commands_dir)])
        if not ispkg and not name.startswith("_")
    ]


def load_command(command: str):
    importlib.import_module(f"pydiverse.ladderwalk.management.commands.{command}")


def dynamically_load_commands():
    for command in find_commands():
        load_command(command)


dynamically_load_commands()
