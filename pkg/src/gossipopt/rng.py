"""Deterministic random-stream derivation.

Every source of randomness in a run is derived from one master seed through
an explicit key path, so that node 3's compression noise in round 17 is the
same stream no matter how many other draws happened before it or on which
thread.  Keys are small integers (purpose codes, round numbers, node ids);
strings are accepted and hashed position-independently via their bytes,
never through Python's salted ``hash``.
"""

from __future__ import annotations

import numpy as np

# Purpose codes for the standard key paths used by the algorithms.
GRAD = 0
COMPRESS_H = 1
COMPRESS_G = 2
DATA = 3
TOPOLOGY = 4


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        k = int(key)
        if k < 0:
            raise ValueError(f"stream keys must be non-negative, got {k}")
        return k
    if isinstance(key, str):
        return int.from_bytes(key.encode("utf-8"), "big") % (2**63)
    raise TypeError(f"stream keys must be int or str, got {type(key).__name__}")


class RngStream:
    """A node in a deterministic tree of random streams.

    ``child(*keys)`` derives an independent stream; the same (seed, key path)
    always yields the same stream.  ``generator()`` returns a fresh numpy
    Generator positioned at the start of this stream, so calling it twice
    replays identical draws.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = _path

    def child(self, *keys) -> "RngStream":
        ints = tuple(_key_to_int(k) for k in keys)
        return RngStream(self.seed, self.path + ints)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
