"""Deterministic named RNG substreams.

All randomness in a run derives from one root seed. Each consumer asks for a
stream by name; the (root, name) pair maps to a fixed SeedSequence, so adding
draws to one stream never shifts another. Stream draw counts are tracked so
tests can assert which components consumed randomness.
"""

from __future__ import annotations

import zlib

import numpy as np

# Streams used by the trainer / eval paths. Extra names are allowed; these are
# the ones with cross-module meaning.
KNOWN_STREAMS = (
    "world",
    "rollout",
    "critic-noise",
    "projections",
    "bootstrap",
    "init-generator",
    "init-critic",
    "sample-noise",
)


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class Stream:
    """A numpy Generator plus a draw counter."""

    def __init__(self, root_seed: int, name: str):
        ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(_name_key(name),))
        self.name = name
        self.gen = np.random.Generator(np.random.PCG64(ss))
        self.draws = 0

    def standard_normal(self, shape=()):
        self.draws += 1
        return self.gen.standard_normal(shape)

    def integers(self, low, high, size=None):
        self.draws += 1
        return self.gen.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        self.draws += 1
        return self.gen.uniform(low, high, size=size)

    def choice(self, n, size=None, replace=True):
        self.draws += 1
        return self.gen.choice(n, size=size, replace=replace)


class StreamSet:
    """Lazily constructed named streams off one root seed."""

    def __init__(self, root_seed: int):
        self.root_seed = int(root_seed)
        self._streams: dict[str, Stream] = {}

    def get(self, name: str) -> Stream:
        if name not in self._streams:
            self._streams[name] = Stream(self.root_seed, name)
        return self._streams[name]

    def draw_counts(self) -> dict[str, int]:
        return {k: s.draws for k, s in sorted(self._streams.items())}


def stream_rng(root_seed: int, name: str) -> np.random.Generator:
    """One-off Generator for a named substream (no bookkeeping)."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(_name_key(name),))
    return np.random.Generator(np.random.PCG64(ss))
