from __future__ import annotations

import math
from pathlib import Path
from typing import TextIO

import attrs
import numpy as np
from attrs import frozen

from pydiverse.ladderwalk._typing import Vertex, as_vertex
from pydiverse.ladderwalk.errors import ParameterError, WindowFormatError

FORMAT_TAG = "ladder-window"
FORMAT_VERSION = "v1"


def _bits(values) -> np.ndarray:
    arr = np.array(values, dtype=bool).reshape(-1)
    arr.setflags(write=False)
    return arr


@frozen(eq=False)
class WindowConfig:
    """Edge configuration of the ladder restricted to the columns ``[x_min, x_max]``.

    ``vertical[k]`` is the rung at ``x_min + k``; ``h_bottom[k]`` and ``h_top[k]``
    are the horizontal edges from column ``x_min + k`` to ``x_min + k + 1``.
    Vertices are indexed as ``2 * (x - x_min) + y``.
    """

    x_min: int = attrs.field(converter=int)
    x_max: int = attrs.field(converter=int)
    vertical: np.ndarray = attrs.field(converter=_bits)
    h_bottom: np.ndarray = attrs.field(converter=_bits)
    h_top: np.ndarray = attrs.field(converter=_bits)
    conditioned: bool = attrs.field(default=False, converter=bool)
    p: float | None = attrs.field(default=None)

    def __attrs_post_init__(self):
        if self.x_min >= self.x_max:
            raise ParameterError(
                f"empty window: x_min={self.x_min} must be < x_max={self.x_max}"
            )
        n = self.n_columns
        if self.vertical.size != n:
            raise ParameterError(
                f"expected {n} vertical bits, got {self.vertical.size}"
            )
        for name in ("h_bottom", "h_top"):
            size = getattr(self, name).size
            if size != n - 1:
                raise ParameterError(f"expected {n - 1} {name} bits, got {size}")

    @classmethod
    def all_closed(cls, x_min: int, x_max: int, **kwargs) -> WindowConfig:
        n = x_max - x_min + 1
        closed = np.zeros(n - 1)
        return cls(x_min, x_max, np.zeros(n), closed, closed.copy(), **kwargs)

    @classmethod
    def all_open(cls, x_min: int, x_max: int, **kwargs) -> WindowConfig:
        n = x_max - x_min + 1
        return cls(x_min, x_max, np.ones(n), np.ones(n - 1), np.ones(n - 1), **kwargs)

    @classmethod
    def bottom_line(cls, x_min: int, x_max: int, **kwargs) -> WindowConfig:
        """Only the bottom row is open."""
        n = x_max - x_min + 1
        return cls(x_min, x_max, np.zeros(n), np.ones(n - 1), np.zeros(n - 1), **kwargs)

    # Geometry

    @property
    def n_columns(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def n_vertices(self) -> int:
        return 2 * self.n_columns

    @property
    def n_edges(self) -> int:
        return 3 * self.n_columns - 2

    @property
    def xs(self) -> np.ndarray:
        return np.arange(self.x_min, self.x_max + 1)

    def contains(self, v) -> bool:
        x, y = as_vertex(v)
        return self.x_min <= x <= self.x_max and y in (0, 1)

    def index(self, v) -> int:
        x, y = as_vertex(v)
        if not self.contains((x, y)):
            raise ParameterError(f"vertex {(x, y)} outside of window")
        return 2 * (x - self.x_min) + y

    def vertex(self, i: int) -> Vertex:
        return self.x_min + int(i) // 2, int(i) % 2

    def edge_open(self, v, w) -> bool:
        """Whether the ladder edge between neighbours `v` and `w` is open."""
        (xv, yv), (xw, yw) = as_vertex(v), as_vertex(w)
        if not (self.contains((xv, yv)) and self.contains((xw, yw))):
            return False
        if xv == xw and yv != yw:
            return bool(self.vertical[xv - self.x_min])
        if yv == yw and abs(xv - xw) == 1:
            k = min(xv, xw) - self.x_min
            return bool((self.h_top if yv else self.h_bottom)[k])
        raise ParameterError(f"{v} and {w} are not adjacent")

    def column(self, x: int) -> tuple[int, int, int]:
        """``(v, hb, ht)`` bits of column `x`; horizontals at ``x_max`` read as 0."""
        k = x - self.x_min
        if not 0 <= k < self.n_columns:
            raise ParameterError(f"column {x} outside of window")
        if k == self.n_columns - 1:
            return int(self.vertical[k]), 0, 0
        return int(self.vertical[k]), int(self.h_bottom[k]), int(self.h_top[k])

    def edge_lists(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays ``(src, dst)`` of all open edges."""
        k = np.arange(self.n_columns)
        kh = k[:-1]
        src = np.concatenate(
            [2 * k[self.vertical], 2 * kh[self.h_bottom], 2 * kh[self.h_top] + 1]
        )
        dst = np.concatenate(
            [
                2 * k[self.vertical] + 1,
                2 * kh[self.h_bottom] + 2,
                2 * kh[self.h_top] + 3,
            ]
        )
        return src, dst

    def open_fraction(self) -> float:
        n_open = self.vertical.sum() + self.h_bottom.sum() + self.h_top.sum()
        return float(n_open) / self.n_edges

    # Derived windows

    def slice(self, a: int, b: int) -> WindowConfig:
        """Sub-window on the columns ``[a, b]``."""
        if not (self.x_min <= a < b <= self.x_max):
            raise ParameterError(f"[{a}, {b}] is not a sub-window of {self.span}")
        i, j = a - self.x_min, b - self.x_min
        return WindowConfig(
            a,
            b,
            self.vertical[i : j + 1],
            self.h_bottom[i:j],
            self.h_top[i:j],
            conditioned=self.conditioned,
            p=self.p,
        )

    def shift(self, dx: int) -> WindowConfig:
        """The shifted environment: column ``x`` of the result is column ``x + dx``."""
        return attrs.evolve(self, x_min=self.x_min - dx, x_max=self.x_max - dx)

    def flip(self) -> WindowConfig:
        """Swap the two rows."""
        return attrs.evolve(self, h_bottom=self.h_top, h_top=self.h_bottom)

    @property
    def span(self) -> tuple[int, int]:
        return self.x_min, self.x_max

    def packed_bits(self) -> np.ndarray:
        """Column major 3-bit groups ``(v, hb, ht)`` packed into bytes."""
        groups = np.zeros((self.n_columns, 3), dtype=bool)
        groups[:, 0] = self.vertical
        groups[:-1, 1] = self.h_bottom
        groups[:-1, 2] = self.h_top
        return np.packbits(groups.reshape(-1))

    # Equality

    def __eq__(self, other):
        if not isinstance(other, WindowConfig):
            return NotImplemented
        return (
            self.span == other.span
            and self.conditioned == other.conditioned
            and np.array_equal(self.vertical, other.vertical)
            and np.array_equal(self.h_bottom, other.h_bottom)
            and np.array_equal(self.h_top, other.h_top)
        )

    def __hash__(self):
        return hash((self.span, self.conditioned, self.packed_bits().tobytes()))

    def __repr__(self):
        return (
            f"<WindowConfig [{self.x_min}, {self.x_max}] p={self.p}"
            f" conditioned={self.conditioned}>"
        )

    # Serialization

    def dumps(self, header_comments: dict | None = None) -> str:
        lines = [f"# {key}: {value}" for key, value in (header_comments or {}).items()]
        p = "nan" if self.p is None else repr(float(self.p))
        lines.append(
            f"{FORMAT_TAG} {FORMAT_VERSION} {self.x_min} {self.x_max}"
            f" {p} {int(self.conditioned)}"
        )
        for x in self.xs:
            v, hb, ht = self.column(int(x))
            lines.append(f"{x} {v} {hb} {ht}")
        return "\n".join(lines) + "\n"

    def write(self, file: str | Path | TextIO, header_comments: dict | None = None):
        text = self.dumps(header_comments)
        if isinstance(file, (str, Path)):
            Path(file).write_text(text)
        else:
            file.write(text)


def loads(text: str) -> WindowConfig:
    """Parse the text form written by :py:meth:`WindowConfig.dumps`.

    Empty lines and lines starting with ``#`` are ignored.
    """
    rows = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise WindowFormatError("no window header found")

    lineno, header = rows[0]
    if len(header) != 6 or header[0] != FORMAT_TAG:
        raise WindowFormatError(f"expected '{FORMAT_TAG} ...' header", lineno)
    if header[1] != FORMAT_VERSION:
        raise WindowFormatError(f"unsupported version {header[1]!r}", lineno)
    try:
        x_min, x_max = int(header[2]), int(header[3])
        p = float(header[4])
        conditioned = _parse_bit(header[5], lineno)
    except ValueError as e:
        raise WindowFormatError(f"malformed header: {e}", lineno) from None
    if x_min >= x_max:
        raise WindowFormatError("x_min must be smaller than x_max", lineno)

    n = x_max - x_min + 1
    columns = rows[1:]
    if len(columns) != n:
        line = columns[-1][0] if columns else lineno
        raise WindowFormatError(f"expected {n} column lines, got {len(columns)}", line)

    bits = np.zeros((n, 3), dtype=bool)
    for k, (lineno, fields) in enumerate(columns):
        if len(fields) != 4:
            raise WindowFormatError("expected 'x v hb ht'", lineno)
        try:
            x = int(fields[0])
        except ValueError:
            raise WindowFormatError(f"invalid x {fields[0]!r}", lineno) from None
        if x != x_min + k:
            raise WindowFormatError(f"expected column {x_min + k}, got {x}", lineno)
        bits[k] = [_parse_bit(b, lineno) for b in fields[1:]]
        if k == n - 1 and bits[k, 1:].any():
            raise WindowFormatError("horizontal edge leaves the window", lineno)

    return WindowConfig(
        x_min,
        x_max,
        bits[:, 0],
        bits[:-1, 1],
        bits[:-1, 2],
        conditioned=conditioned,
        p=None if math.isnan(p) else p,
    )


def read(file: str | Path | TextIO) -> WindowConfig:
    if isinstance(file, (str, Path)):
        return loads(Path(file).read_text())
    return loads(file.read())


def _parse_bit(token: str, lineno: int) -> bool:
    if token not in ("0", "1"):
        raise WindowFormatError(f"expected a bit, got {token!r}", lineno)
    return token == "1"
