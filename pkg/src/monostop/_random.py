"""Per-path random streams.

Every simulated path owns a family of independent streams derived from
``(root_seed, path_index)`` with numpy's counter-based Philox generator:

    key     = (root_seed, path_index)
    counter = (0, chunk, stream, 0)

A path therefore sees the same numbers no matter how paths are batched or in
which order batches run, which is what makes estimates bit-reproducible.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO53 = 2.0 ** -53

_philox = np.random.Philox(key=[0, 0])


def _block(seed: int, row: int, stream: int, chunk: int, size: int) -> np.ndarray:
    _philox.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array([0, chunk, stream, 0], dtype=np.uint64),
            "key": np.array([seed & _MASK64, row & _MASK64], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }
    return _philox.random_raw(size)


def to_open_unit(raw: np.ndarray) -> np.ndarray:
    """Map raw 64-bit words to doubles strictly inside (0, 1)."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53


class StepTape:
    """Lock-step randomness for discrete problems: one uniform per stream per step."""

    def __init__(self, seed: int, rows, n_streams: int, chunk: int = 64):
        self.seed = int(seed)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.n_streams = n_streams
        self.chunk = chunk
        self._buf = np.empty((len(self.rows), chunk, n_streams))
        self._loaded = -1
        self._step = 0

    def _load(self, chunk_id: int, local: np.ndarray) -> None:
        # rows that already stopped are never read again, so only live rows are refilled
        size = self.chunk * self.n_streams
        for i in local:
            raw = _block(self.seed, int(self.rows[i]), 0, chunk_id, size)
            self._buf[i] = to_open_unit(raw).reshape(self.chunk, self.n_streams)
        self._loaded = chunk_id

    def next(self, local: np.ndarray) -> np.ndarray:
        """Uniforms for the next step, shape (len(local), n_streams)."""
        chunk_id, offset = divmod(self._step, self.chunk)
        if chunk_id != self._loaded:
            self._load(chunk_id, local)
        self._step += 1
        return self._buf[local, offset]


class StreamTape:
    """Independent per-stream consumption, used by event-driven simulation."""

    def __init__(self, seed: int, rows, n_streams: int, chunk: int = 16):
        self.seed = int(seed)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.chunk = chunk
        n = len(self.rows)
        self._buf = np.empty((n, n_streams, chunk))
        self._pos = np.zeros((n, n_streams), dtype=np.int64)
        self._chunk_id = np.zeros((n, n_streams), dtype=np.int64)
        for i, row in enumerate(self.rows):
            for s in range(n_streams):
                self._buf[i, s] = to_open_unit(_block(self.seed, int(row), s, 0, chunk))

    def take(self, stream: int, local: np.ndarray) -> np.ndarray:
        local = np.asarray(local, dtype=np.int64)
        exhausted = local[self._pos[local, stream] >= self.chunk]
        for i in exhausted:
            self._chunk_id[i, stream] += 1
            raw = _block(self.seed, int(self.rows[i]), stream,
                         int(self._chunk_id[i, stream]), self.chunk)
            self._buf[i, stream] = to_open_unit(raw)
            self._pos[i, stream] = 0
        out = self._buf[local, stream, self._pos[local, stream]]
        self._pos[local, stream] += 1
        return out


class BulkTape:
    """Single-generator tape for Monte Carlo checks that need no path identity."""

    def __init__(self, seed: int, n_streams: int):
        self.rng = np.random.default_rng(seed)
        self.n_streams = n_streams

    def _u(self, shape) -> np.ndarray:
        raw = self.rng.integers(0, 2 ** 53, size=shape, dtype=np.uint64)
        return (raw.astype(np.float64) + 0.5) * _TWO53

    def next(self, local: np.ndarray) -> np.ndarray:
        return self._u((len(local), self.n_streams))

    def take(self, stream: int, local: np.ndarray) -> np.ndarray:
        return self._u(len(local))
