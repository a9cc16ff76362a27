from __future__ import annotations

import math
import os
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import attrs
import structlog
import yaml
from attrs import frozen
from box import Box

from pydiverse.ladderwalk.errors import ConfigError
from pydiverse.ladderwalk.util.deep_merge import deep_merge

logger = structlog.get_logger(logger_name=__name__)

THREADS_ENV = "LADDER_THREADS"
CONFIG_ENV = "LADDERWALK_CONFIG"
# keys that only change how replicas are scheduled, never what they compute
SCHEDULING_KEYS = ("threads", "engine")


def _check_p(_instance, _attribute, value):
    if not 0 < value < 1:
        raise ConfigError(f"p must lie in (0, 1), got {value}")


def _check_lambdas(_instance, attribute, value):
    if any(not lam >= 0 or math.isinf(lam) for lam in value):
        raise ConfigError(f"{attribute.name} must be finite and nonnegative: {value}")


def _positive(_instance, attribute, value):
    if value is not None and value < 1:
        raise ConfigError(f"{attribute.name} must be >= 1, got {value}")


def _non_negative(_instance, attribute, value):
    if value < 0:
        raise ConfigError(f"{attribute.name} must be >= 0, got {value}")


def _check_alphas(_instance, attribute, value):
    values = value if isinstance(value, tuple) else (value,)
    if any(not a > 0 or math.isinf(a) for a in values):
        raise ConfigError(f"{attribute.name} must be finite and positive: {value}")


def _floats(values) -> tuple[float, ...]:
    if isinstance(values, (int, float)):
        values = (values,)
    return tuple(float(v) for v in values)


def _frozen_box(value) -> Box:
    return Box(value or {}, frozen_box=True)


@frozen
class ExperimentConfig:
    """Every knob of an experiment run.

    :param lambdas: Bias grid of the Einstein report, largest first.
    :param lam: Bias of the ``speed`` command.
    :param alpha: ``lam**2 n`` of the Girsanov quantity.
    :param alphas: Values of ``alpha`` in the sensitivity sweep.
    :param n1: Left half width of sampled windows.
    :param n2: Right half width of sampled windows.
    :param n_steps: Path length of speed and sigma runs; derived from the bias
        when unset.
    :param lambda0: Bias threshold below which hitting brackets are claimed.
    :param cycle_pool: Number of cycles behind the kappa estimate.
    :param n_envs: Number of environments of environment averaged estimators.
    :param attrs: Free form knobs of single commands.
    """

    p: float = attrs.field(default=0.7, converter=float, validator=_check_p)
    lambdas: tuple[float, ...] = attrs.field(
        default=(0.4, 0.2, 0.1, 0.05), converter=_floats, validator=_check_lambdas
    )
    lam: float = attrs.field(default=0.2, converter=float)
    alpha: float = attrs.field(
        default=1.0, converter=float, validator=_check_alphas
    )
    alphas: tuple[float, ...] = attrs.field(
        default=(0.5, 1.0, 2.0), converter=_floats, validator=_check_alphas
    )
    n1: int = attrs.field(default=500, converter=int, validator=_positive)
    n2: int = attrs.field(default=500, converter=int, validator=_positive)
    margin: int = attrs.field(default=10, converter=int, validator=_non_negative)
    replicas: int = attrs.field(default=200, converter=int, validator=_positive)
    n_steps: int | None = attrs.field(
        default=None,
        converter=attrs.converters.optional(int),
        validator=_positive,
    )
    seed: int = attrs.field(default=0, converter=int)
    threads: int = attrs.field(default=1, converter=int, validator=_positive)
    engine: str = attrs.field(
        default="sequential",
        validator=attrs.validators.in_(("sequential", "dask")),
    )
    out: str = attrs.field(default="ladderwalk-out", converter=str)
    lambda0: float = attrs.field(default=0.2, converter=float)
    hitting_lambdas: tuple[float, ...] = attrs.field(
        default=(0.05, 0.1), converter=_floats, validator=_check_lambdas
    )
    cycle_pool: int = attrs.field(default=100_000, converter=int, validator=_positive)
    n_envs: int = attrs.field(default=1000, converter=int, validator=_positive)
    attrs: Box = attrs.field(factory=dict, converter=_frozen_box)

    def __attrs_post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lam must be nonnegative, got {self.lam}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64 bit integer: {self.seed}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in attrs.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict[str, Any]:
        d = attrs.asdict(self, recurse=False)
        for key in ("lambdas", "alphas", "hitting_lambdas"):
            d[key] = list(d[key])
        d["attrs"] = self.attrs.to_dict()
        return d

    def result_dict(self) -> dict[str, Any]:
        """`to_dict` without the scheduling keys; this is what artifacts record."""
        d = self.to_dict()
        for key in SCHEDULING_KEYS:
            del d[key]
        return d

    def evolve(self, **changes) -> ExperimentConfig:
        return attrs.evolve(self, **changes)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


class LadderwalkConfig:
    """A ladderwalk YAML config file.

    The file is a flat mapping of :py:class:`ExperimentConfig` keys; ``attrs``
    may hold a nested mapping. ``LadderwalkConfig.default()`` looks the file up
    with :py:func:`find_config` and falls back to the built-in defaults.

    :param path: Path of the YAML file, or the raw mapping.
    """

    def __init__(self, path: str | Path | dict[str, Any] | None = None):
        self.path = None
        if path is None:
            self.raw_config = {}
        elif isinstance(path, dict):
            self.raw_config = dict(path)
        else:
            self.path = Path(path)
            with open(self.path, encoding="utf-8") as f:
                self.raw_config = load_yaml(f.read())

    @classmethod
    def default(cls) -> LadderwalkConfig:
        try:
            path = find_config()
        except FileNotFoundError:
            return cls()
        logger.debug("Using config file", path=path)
        return cls(path)

    def get(self, **overrides) -> ExperimentConfig:
        """The validated config with `overrides` applied on top of the file.

        Overrides that are ``None`` are ignored. The environment variable
        ``LADDER_THREADS`` wins over both.
        """
        merged = deep_merge(
            ExperimentConfig().to_dict(),
            self.raw_config,
        )
        merged = deep_merge(
            merged, {k: v for k, v in overrides.items() if v is not None}
        )
        if threads := os.environ.get(THREADS_ENV):
            try:
                merged["threads"] = int(threads)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer: {threads!r}")
        return ExperimentConfig.from_dict(merged)


def load_yaml(text: str) -> dict[str, Any]:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid config file: {e}", line) from e
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("the config file must be a mapping of keys to values", 1)
    return raw


def dump_config(cfg: ExperimentConfig, path: str | Path):
    Path(path).write_text(
        yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8"
    )


def find_config(
    name: str = "ladderwalk",
    search_paths: Iterable[str | Path] | None = None,
) -> str:
    """Searches for a ladderwalk config file

    The path in the ``LADDERWALK_CONFIG`` environment variable is checked
    first. Else the file is searched in

    - the current working directory
    - all its parent directories
    - the user folder

    :param name: The name of the config file without extension.
    :raises FileNotFoundError: if no config file could be found.
    """

    extensions = [".yaml", ".yml"]

    if search_paths is None:
        if path := os.environ.get(CONFIG_ENV, None):
            path = Path(path).expanduser().resolve()
            if path.is_file():
                return str(path)
            for extension in extensions:
                candidate = path / (name + extension)
                if candidate.is_file():
                    return str(candidate)

        search_paths = [
            Path.cwd(),
            *Path.cwd().resolve().parents,
            Path("~").expanduser(),
        ]

    for search_path in search_paths:
        for extension in extensions:
            path = Path(search_path) / (name + extension)
            if path.is_file():
                return str(path)

    raise FileNotFoundError(f"No config file named {name!r} found.")
