"""JSON support for ladderwalk result objects

Objects that need to be decoded again are written as JSON objects with a
``__ladderwalk_type__`` key naming their type. Report objects with a
``to_dict`` method and numpy values are written as plain JSON.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path

import numpy as np

from pydiverse.ladderwalk.estimators.results import EstimateCI
from pydiverse.ladderwalk.percolation.window import WindowConfig, loads

TYPE_KEY = "__ladderwalk_type__"


class Type(str, Enum):
    WINDOW = "window"
    ESTIMATE = "estimate"
    NDARRAY = "numpy:ndarray"
    PATHLIB_PATH = "pathlib:path"

    def __str__(self):
        return self.value


def json_default(o):
    if isinstance(o, WindowConfig):
        return {TYPE_KEY: Type.WINDOW, "text": o.dumps()}
    if isinstance(o, EstimateCI):
        return {TYPE_KEY: Type.ESTIMATE, **o.to_dict()}
    if isinstance(o, np.ndarray):
        return {TYPE_KEY: Type.NDARRAY, "dtype": str(o.dtype), "data": o.tolist()}
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, Path):
        return {TYPE_KEY: Type.PATHLIB_PATH, "path": str(o)}
    if hasattr(o, "to_dict"):
        return o.to_dict()

    raise TypeError(f"Object of type {type(o)} is not JSON serializable")


def json_object_hook(d: dict):
    if TYPE_KEY not in d:
        return d

    type_ = Type(d[TYPE_KEY])
    if type_ == Type.WINDOW:
        return loads(d["text"])
    if type_ == Type.ESTIMATE:
        return EstimateCI(
            value=d["value"],
            se=d["se"],
            n_eff=d["n_eff"],
            method=d["method"],
            confidence=d.get("confidence", 0.95),
            diagnostics=d.get("diagnostics", {}),
            warnings=d.get("warnings", ()),
        )
    if type_ == Type.NDARRAY:
        return np.asarray(d["data"], dtype=d["dtype"])
    if type_ == Type.PATHLIB_PATH:
        return Path(d["path"])

    raise ValueError(f"Invalid value for '{TYPE_KEY}' key: {type_}")


class LadderwalkJSONEncoder(json.JSONEncoder):
    """Non finite floats are written as ``NaN`` / ``Infinity``, which Python's
    json module reads back."""

    def __init__(self, **kwargs):
        kwargs.setdefault("indent", 2)
        super().__init__(
            ensure_ascii=False,
            allow_nan=True,
            sort_keys=True,
            default=json_default,
            **kwargs,
        )


class LadderwalkJSONDecoder(json.JSONDecoder):
    def __init__(self, **kwargs):
        super().__init__(object_hook=json_object_hook, **kwargs)


def dumps(obj) -> str:
    return LadderwalkJSONEncoder().encode(obj)


def loads_json(text: str):
    return LadderwalkJSONDecoder().decode(text)
