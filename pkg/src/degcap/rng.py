"""Seeded randomness streams.

Two layers:

* `RngStream` wraps a counter-based Philox generator keyed by (seed,
  stream_id).  Replicas of an experiment get distinct stream ids and are
  statistically independent by construction; the same (seed, stream_id)
  reproduces the same draws bit for bit.
* hash-derived substreams (`mix64`, `node_uniform`, `node_poisson`) for
  lazily grown trees.  Every tree node owns a 64-bit uid derived from its
  parent's uid and child index, so the draws attached to a node do not
  depend on the order in which the tree is explored.  Lazy and eager
  explorations of the same tree therefore agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer; a cheap, well-mixed 64-bit hash."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def child_uid(parent_uid: int, index: int) -> int:
    """Uid of the index-th child of a node; injective in practice."""
    return mix64(parent_uid ^ mix64(index + 1))


def node_uniform(uid: int, i: int) -> float:
    """i-th uniform(0,1) variate attached to node `uid`."""
    return (mix64(uid ^ (i * _GOLDEN & _MASK64)) >> 11) * (1.0 / 9007199254740992.0)


def node_poisson(uid: int, mean: float, offset: int = 0) -> int:
    """Poisson variate attached to node `uid` by inversion.

    Only used for the modest means of tree growth (mean <= ~30); the
    general-purpose `poisson_draw` below handles arbitrary rates.
    """
    u = node_uniform(uid, offset)
    p = math.exp(-mean)
    c = p
    j = 0
    while u > c:
        j += 1
        p *= mean / j
        c += p
        if j > 1000:  # double-precision tail guard
            break
    return j


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream (64-bit seed + stream index)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=self.seed & _MASK64, counter=[self.stream_id, 0, 0, 0])
        )

    def split(self, n: int) -> list["RngStream"]:
        """n child streams, disjoint from self and from each other."""
        return [self.child(i) for i in range(n)]

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, mix64(self.stream_id ^ mix64(i + 1)))

    def root_uid(self) -> int:
        """Uid for the root of a tree grown from this stream."""
        return mix64(self.seed ^ mix64(self.stream_id))


def poisson_draw(lam: float, rng: RngStream | np.random.Generator) -> int:
    """Exact Poisson(lam) variate.

    Raises ValueError for negative or non-finite rates.
    """
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)) or lam < 0:
        raise ValueError(f"poisson rate must be finite and >= 0, got {lam!r}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return int(gen.poisson(lam))
