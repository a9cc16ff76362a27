"""Output files of the experiment commands.

Every artifact starts with its provenance: package version, generator, master
seed and the full config. Nothing time or host dependent is recorded, so two
runs of the same config produce identical files.
"""

from __future__ import annotations

import io
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import structlog

from pydiverse.ladderwalk.util import json as lw_json
from pydiverse.ladderwalk.util.rng import rng_provenance

logger = structlog.get_logger(logger_name=__name__)

DISTRIBUTION = "pydiverse-ladderwalk"
FLOAT_FORMAT = "%.17g"


def package_version() -> str:
    try:
        return metadata.version(DISTRIBUTION)
    except metadata.PackageNotFoundError:
        return "0+unknown"


def provenance(cfg=None, command: str | None = None, **extra) -> dict[str, Any]:
    prov = {
        "package": DISTRIBUTION,
        "version": package_version(),
        "numpy": np.__version__,
        **rng_provenance(),
    }
    if command is not None:
        prov["command"] = command
    if cfg is not None:
        prov["seed"] = cfg.seed
        prov["config"] = cfg.result_dict()
    prov.update(extra)
    return prov


def _comment_header(prov: dict[str, Any]) -> str:
    lines = []
    for key, value in prov.items():
        if isinstance(value, (dict, list)):
            value = lw_json.LadderwalkJSONEncoder(indent=None).encode(value)
        lines.append(f"# {key}: {value}\n")
    return "".join(lines)


def write_csv(df: pd.DataFrame, path: str | Path, prov: dict[str, Any] | None = None):
    """CSV with ``# key: value`` provenance lines in front of the header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    buffer.write(_comment_header(prov or provenance()))
    df.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text(buffer.getvalue(), encoding="utf-8")
    logger.info("Wrote CSV", path=str(path), rows=len(df))


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_json(data: Any, path: str | Path, prov: dict[str, Any] | None = None):
    """JSON document ``{"provenance": ..., **data}``; `data` may be any object
    :py:mod:`pydiverse.ladderwalk.util.json` can encode."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if hasattr(data, "to_dict"):
        data = data.to_dict()
    if prov is not None or "provenance" not in data:
        data = {"provenance": prov or provenance(), **data}
    path.write_text(lw_json.dumps(data) + "\n", encoding="utf-8")
    logger.info("Wrote JSON", path=str(path))


def read_json(path: str | Path) -> Any:
    return lw_json.loads_json(Path(path).read_text(encoding="utf-8"))
