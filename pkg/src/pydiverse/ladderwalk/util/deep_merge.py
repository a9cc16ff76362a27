"""Deep update of nested config dictionaries.

A ``None`` value in the override deletes the key, which is the only way to
remove a default from a YAML override file. Scalars and lists are replaced
whole; only mappings are merged key by key.
"""

from __future__ import annotations

from collections.abc import Mapping

from box import Box


def deep_merge(x, y):
    if isinstance(x, Mapping) != isinstance(y, Mapping) and x is not None:
        raise TypeError(
            f"deep_merge failed due to type mismatch '{x}' (type: {type(x)}) vs. '{y}'"
            f" (type: {type(y)})"
        )

    if isinstance(x, Box):
        return Box(_deep_merge_dict(x, y), frozen_box=True)
    if isinstance(x, Mapping):
        return _deep_merge_dict(x, y)
    return y


def _deep_merge_dict(x: Mapping, y: Mapping) -> dict:
    z = dict(x)
    for key in x:
        if key in y:
            if y[key] is None:
                del z[key]
            else:
                z[key] = deep_merge(x[key], y[key])
    z.update(
        {key: value for key, value in y.items() if key not in x and value is not None}
    )
    return z
