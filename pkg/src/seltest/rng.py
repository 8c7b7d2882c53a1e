"""Reproducible, parallel-safe random number streams.

Streams are value-like: a (seed, stream_id) pair fully determines the
sequence, independent of thread count or evaluation order. Each stream
keys a counter-based Philox generator, so distinct stream ids give
statistically independent sequences and a stream can be re-materialised
anywhere (worker processes included) without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream", "draw_uniforms"]

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # SplitMix64 finaliser; used to derive child stream ids without collisions.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    """A named position in a family of independent random streams."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """A fresh generator starting at the beginning of this stream."""
        key = np.array(
            [self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        """Derive a child stream; children of distinct (stream, k) never collide."""
        return RngStream(self.seed, _splitmix64((self.stream_id << 1) ^ _splitmix64(k)))


def draw_uniforms(stream: RngStream, n: int) -> np.ndarray:
    """n i.i.d. U(0,1) draws; identical for identical (seed, stream_id)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return stream.generator().random(n)
