"""Counter based random streams

Every random quantity in ladderwalk is drawn from a stream that is a pure
function of ``(master seed, stream labels)``. The stream id is a 64 bit hash of
the labels and the Philox key is ``seed << 64 | stream id``, so the numbers a
replica sees don't depend on which worker computes it or in what order.
"""

from __future__ import annotations

import attrs
import numpy as np
from attrs import frozen

from pydiverse.ladderwalk.errors import ParameterError
from pydiverse.ladderwalk.util.hashing import stable_int

GENERATOR_NAME = "Philox-4x64-10"
_MASK64 = (1 << 64) - 1


def stream_id(*labels) -> int:
    return stable_int(*labels, bits=64)


def make_stream(seed: int, *labels) -> np.random.Generator:
    """Generator for the stream identified by `labels` under master `seed`."""
    if not 0 <= int(seed) <= _MASK64:
        raise ParameterError(f"seed must be an unsigned 64 bit integer, got {seed}")
    key = (int(seed) << 64) | stream_id(*labels)
    return np.random.Generator(np.random.Philox(key=key))


@frozen
class RandomStreams:
    """Factory for the named streams of one experiment."""

    seed: int = attrs.field(converter=int)

    @seed.validator
    def _check_seed(self, _attribute, value):
        if not 0 <= value <= _MASK64:
            raise ParameterError(
                f"seed must be an unsigned 64 bit integer, got {value}"
            )

    def stream(self, *labels) -> np.random.Generator:
        return make_stream(self.seed, *labels)

    def stream_id(self, *labels) -> int:
        return stream_id(*labels)


def rng_provenance() -> dict[str, str]:
    return {
        "generator": GENERATOR_NAME,
        "numpy": np.__version__,
        "stream_key": "seed << 64 | stable_int(labels)",
    }
