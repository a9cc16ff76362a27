from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import attrs
import numpy as np
import pandas as pd
import structlog
from attrs import frozen

from pydiverse.ladderwalk._typing import VertexLike, as_vertex
from pydiverse.ladderwalk.errors import (
    ParameterError,
    PreconditionError,
    WalkBoundaryError,
)
from pydiverse.ladderwalk.percolation.window import WindowConfig
from pydiverse.ladderwalk.util.rng import make_stream, stream_id
from pydiverse.ladderwalk.walk.kernel import KernelTable

if TYPE_CHECKING:
    from pydiverse.ladderwalk.regeneration import RegenRecord

logger = structlog.get_logger(logger_name=__name__)


@frozen(eq=False)
class Trajectory:
    """A simulated path ``Y_0, ..., Y_n`` with its Girsanov accumulators.

    :param bias: The bias the path was simulated with.
    :param tilt: The bias the weight ``log_weight = sum log(p_tilt / p_0)`` refers to.
    """

    env: WindowConfig
    bias: float
    tilt: float
    seed: int
    stream_id: int
    positions: np.ndarray = attrs.field(repr=False)
    outcomes: np.ndarray = attrs.field(repr=False)
    M: float
    A: float
    log_weight: float
    remainder: float

    @property
    def n_steps(self) -> int:
        return len(self.outcomes)

    @property
    def xs(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def displacement(self) -> int:
        """``X_n - X_0``"""
        return int(self.positions[-1, 0] - self.positions[0, 0])

    def max_sq_displacement(self) -> float:
        return float(np.max((self.xs - self.xs[0]) ** 2))

    def _table(self) -> KernelTable:
        return KernelTable.build(self.env, self.bias, self.tilt)

    def _rows(self) -> np.ndarray:
        return 2 * (self.positions[:-1, 0] - self.env.x_min) + self.positions[:-1, 1]

    def nu_increments(self) -> np.ndarray:
        """``nu(Y_{k-1}, Y_k)`` for every step, recomputed from the positions."""
        return self._table().nu[self._rows(), self.outcomes]

    def replay_martingale(self) -> float:
        return float(self.nu_increments().sum())

    def scaled_path(self, t) -> np.ndarray:
        """``X_{floor(n t)} / sqrt(n)`` for ``t`` in ``[0, 1]``."""
        t = np.clip(np.asarray(t, dtype=float), 0, 1)
        k = np.floor(self.n_steps * t).astype(int)
        return (self.xs[k] - self.xs[0]) / np.sqrt(self.n_steps)

    def summary(self, regen: RegenRecord | None = None, retries: int = 0):
        return ReplicaSummary(
            n_steps=self.n_steps,
            bias=self.bias,
            tilt=self.tilt,
            displacement=self.displacement,
            M=self.M,
            A=self.A,
            log_weight=self.log_weight,
            remainder=self.remainder,
            max_sq_displacement=self.max_sq_displacement(),
            regen=regen,
            retries=retries,
        )

    def truncate(self, n_steps: int) -> Trajectory:
        """The first `n_steps` steps of the path with their accumulators."""
        if not 0 <= n_steps <= self.n_steps:
            raise ParameterError(f"cannot cut {self.n_steps} steps at {n_steps}")
        table = self._table()
        rows, outs = self._rows()[:n_steps], self.outcomes[:n_steps]
        nu = table.nu[rows, outs]
        return attrs.evolve(
            self,
            positions=self.positions[: n_steps + 1],
            outcomes=outs,
            M=float(nu.sum()),
            A=float(((nu**2 - table.second[rows, outs]) / 2).sum()),
            log_weight=float(table.log_ratio[rows, outs].sum()),
            remainder=float(table.remainder[rows, outs].sum()),
        )

    def to_frame(self) -> pd.DataFrame:
        """Per step dump ``step, x, y, M, A, log_weight`` (running values)."""
        table = self._table()
        rows, outs = self._rows(), self.outcomes
        nu = table.nu[rows, outs]
        a = (nu**2 - table.second[rows, outs]) / 2
        return pd.DataFrame(
            {
                "step": np.arange(self.n_steps + 1),
                "x": self.positions[:, 0],
                "y": self.positions[:, 1],
                "M": np.concatenate([[0.0], np.cumsum(nu)]),
                "A": np.concatenate([[0.0], np.cumsum(a)]),
                "log_weight": np.concatenate(
                    [[0.0], np.cumsum(table.log_ratio[rows, outs])]
                ),
            }
        )


@frozen
class ReplicaSummary:
    """What an estimator needs from one trajectory, without the path itself."""

    n_steps: int
    bias: float
    tilt: float
    displacement: int
    M: float
    A: float
    log_weight: float
    remainder: float
    max_sq_displacement: float
    regen: Any = None
    retries: int = 0


def simulate(
    env: WindowConfig,
    lam: float,
    start: VertexLike,
    n_steps: int,
    stream: np.random.Generator | tuple[int, Any],
    *,
    tilt: float | None = None,
    margin: int = 1,
) -> Trajectory:
    """Simulate `n_steps` of the lazy walk with bias `lam` from `start`.

    :param stream: Either a generator or ``(master seed, labels)``; only the
        latter makes the trajectory replayable from its recorded stream id.
    :param tilt: Bias at which the Girsanov weight is evaluated, defaults to `lam`.
    :param margin: Columns next to the window boundary the walk must not enter.
    :raises WalkBoundaryError: if the walk enters the margin.
    """
    if n_steps < 0:
        raise ParameterError(f"n_steps must be nonnegative, got {n_steps}")
    margin = max(1, int(margin))
    start = as_vertex(start)
    if not (env.x_min + margin <= start[0] <= env.x_max - margin):
        raise PreconditionError(f"start {start} isn't inside the safe window")

    if isinstance(stream, tuple):
        seed, labels = stream
        labels = labels if isinstance(labels, tuple) else (labels,)
        sid = stream_id(*labels)
        rng = make_stream(seed, *labels)
    else:
        seed, sid, rng = -1, -1, stream

    table = KernelTable.build(env, lam, tilt)
    cum = np.cumsum(table.prob[:, :3], axis=1).tolist()
    lo = 2 * margin
    hi = env.n_vertices - 2 * margin
    uniforms = rng.random(n_steps).tolist()

    pos = env.index(start)
    path = [pos] * (n_steps + 1)
    outcomes = [3] * n_steps
    for k, u in enumerate(uniforms):
        c = cum[pos]
        if u < c[0]:
            nxt, o = pos - 2, 0
        elif u < c[1]:
            nxt, o = pos + 2, 1
        elif u < c[2]:
            nxt, o = pos ^ 1, 2
        else:
            nxt, o = pos, 3
        if not lo <= nxt < hi:
            raise WalkBoundaryError(k + 1, env.vertex(nxt))
        path[k + 1] = nxt
        outcomes[k] = o
        pos = nxt

    idx = np.asarray(path, dtype=np.int64)
    outs = np.asarray(outcomes, dtype=np.int8)
    rows = idx[:-1]
    positions = np.stack([env.x_min + idx // 2, idx % 2], axis=1)
    nu = table.nu[rows, outs]
    return Trajectory(
        env=env,
        bias=lam,
        tilt=table.tilt,
        seed=seed,
        stream_id=sid,
        positions=positions,
        outcomes=outs,
        M=float(nu.sum()),
        A=float(((nu**2 - table.second[rows, outs]) / 2).sum()),
        log_weight=float(table.log_ratio[rows, outs].sum()),
        remainder=float(table.remainder[rows, outs].sum()),
    )


def girsanov_components(traj: Trajectory) -> tuple[float, float, float, float]:
    """``(M_n, A_n, R_n, log_weight)`` of `traj` at its tilt.

    ``log_weight == tilt * M_n - tilt**2 * A_n + R_n`` up to rounding.
    """
    return traj.M, traj.A, traj.remainder, traj.log_weight


def write_trajectory_csv(
    traj: Trajectory, path: str | Path, provenance: dict | None = None
):
    from pydiverse.ladderwalk.core.artifacts import write_csv

    write_csv(traj.to_frame(), path, provenance)
