"""
Deterministic random streams.

Every random number is a pure function of (seed, frame, stream id, lane, dimension),
where a lane is a pixel index in the renderer or a trial index in the testbed.
Because nothing is carried between calls, results do not depend on evaluation order
or on how lanes are split across worker threads.
"""
from enum import IntEnum
from typing import Union

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_MASK64 = (1 << 64) - 1
_TO_UNIT = 1.0 / float(1 << 53)

Lanes = Union[int, np.ndarray]


class Stream(IntEnum):
    """Stream ids. Mutation and spatial ids are bases offset by iteration/round."""
    INITIAL = 1
    TEMPORAL = 2
    PATH = 3
    TESTBED_CANDIDATES = 8
    TESTBED_SELECT = 9
    TESTBED_INPUTS = 10
    TESTBED_CHAIN = 11
    REFERENCE = 12
    MUTATION = 1 << 10
    SPATIAL = 1 << 16


def _splitmix(x: np.ndarray) -> np.ndarray:
    # uint64 arrays wrap on overflow, which is what the finaliser relies on
    x = x + _GOLDEN
    x = (x ^ (x >> _S30)) * _MIX1
    x = (x ^ (x >> _S27)) * _MIX2
    return x ^ (x >> _S31)


def _u64(value: int) -> np.ndarray:
    return np.array([int(value) & _MASK64], dtype=np.uint64)


class RandomStreams:
    """Counter-based generator keyed by a global seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._root = _splitmix(_u64(self.seed))

    def spawn(self, offset: int) -> "RandomStreams":
        """Independent generator for run `offset` (e.g. one ensemble member)."""
        return RandomStreams(int(_splitmix(self._root ^ _u64(offset + 1))[0]))

    def _bits(self, stream: int, lanes: Lanes, dims: int, frame: int) -> np.ndarray:
        lanes = np.arange(lanes, dtype=np.uint64) if np.isscalar(lanes) else np.asarray(lanes).astype(np.uint64)
        key = _splitmix(_splitmix(self._root ^ _u64(frame)) ^ _u64(stream))
        lane_key = _splitmix(key ^ lanes)
        dim_ids = np.arange(1, dims + 1, dtype=np.uint64)
        return _splitmix(lane_key[:, None] ^ (dim_ids[None, :] * _GOLDEN))

    def uniform(self, stream: int, lanes: Lanes, dims: int, frame: int = 0) -> np.ndarray:
        """
        Uniform numbers in [0, 1).

        Args:
            stream: Stream id (see Stream)
            lanes: Lane count, or explicit lane indices
            dims: Numbers per lane
            frame: Frame or experiment phase

        Returns:
            Array of shape (n_lanes, dims)
        """
        bits = self._bits(stream, lanes, dims, frame)
        return (bits >> _S11).astype(np.float64) * _TO_UNIT

    def normal(self, stream: int, lanes: Lanes, dims: int, frame: int = 0) -> np.ndarray:
        """Standard normal numbers, one uniform consumed per variate."""
        bits = self._bits(stream, lanes, dims, frame)
        u = ((bits >> _S11).astype(np.float64) + 0.5) * _TO_UNIT
        return ndtri(u)


class LaneSource:
    """
    Generator-like view over a fixed block of counter-based numbers.

    Sampling routines only call random(shape) and standard_normal(shape), so they accept
    either a numpy Generator or a LaneSource. Each call consumes the next columns of the
    block: shape (n,) takes one column, shape (n, d) takes d columns.
    """

    def __init__(self, streams: RandomStreams, stream: int, lanes: Lanes, dims: int, frame: int = 0):
        self._block = streams.uniform(stream, lanes, dims, frame)
        self._next = 0

    @property
    def remaining(self) -> int:
        return self._block.shape[1] - self._next

    def _take(self, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        if shape[0] != self._block.shape[0]:
            raise ValueError(f"lane count {shape[0]} does not match source ({self._block.shape[0]})")
        cols = int(np.prod(shape[1:], dtype=int)) if len(shape) > 1 else 1
        if cols > self.remaining:
            raise ValueError(f"random source exhausted: need {cols}, have {self.remaining}")
        out = self._block[:, self._next:self._next + cols]
        self._next += cols
        return out.reshape(shape)

    def random(self, size) -> np.ndarray:
        return self._take(size)

    def standard_normal(self, size) -> np.ndarray:
        # half-ulp shift keeps the argument strictly inside (0, 1)
        return ndtri(self._take(size) + 0.5 * _TO_UNIT)
