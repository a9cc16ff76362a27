from __future__ import annotations

from .artifacts import provenance, read_csv, read_json, write_csv, write_json
from .config import ExperimentConfig, LadderwalkConfig, find_config

__all__ = [
    "ExperimentConfig",
    "LadderwalkConfig",
    "find_config",
    "provenance",
    "read_csv",
    "read_json",
    "write_csv",
    "write_json",
]
