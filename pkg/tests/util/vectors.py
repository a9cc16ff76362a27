"""Hand-built windows with known decompositions."""

from __future__ import annotations

import numpy as np

from pydiverse.ladderwalk.percolation import WindowConfig


def window(x_min: int, x_max: int, vertical=(), bottom=(), top=(), **kwargs):
    """Window with only the listed edges open.

    `vertical` lists rung columns, `bottom` and `top` list the left end ``x`` of
    open horizontal edges ``x <-> x + 1``.
    """
    n = x_max - x_min + 1
    v, hb, ht = np.zeros(n, bool), np.zeros(n - 1, bool), np.zeros(n - 1, bool)
    v[[x - x_min for x in vertical]] = True
    hb[[x - x_min for x in bottom]] = True
    ht[[x - x_min for x in top]] = True
    return WindowConfig(x_min, x_max, v, hb, ht, **kwargs)


def trap_window() -> WindowConfig:
    """Bottom row open on ``[0, 10]``, a rung at 4 and top edges 4-5, 5-6, 6-7.

    The top vertices at 5, 6 and 7 form a trap of length 3.
    """
    return window(0, 10, vertical=[4], bottom=range(10), top=[4, 5, 6])


def loop_window() -> WindowConfig:
    """Bottom row open on ``[-6, 6]`` with a square loop on the columns 1 and 2."""
    return window(-6, 6, vertical=[1, 2], bottom=range(-6, 6), top=[1])


def open_strip(x_min: int = -8, x_max: int = 8) -> WindowConfig:
    return WindowConfig.all_open(x_min, x_max)
