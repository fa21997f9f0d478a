"""Seeded, splittable randomness.

Every random decision in a run is traced back to a single 64-bit master
seed.  Named sub-streams are numpy generators; per-node choices use a
counter-based hash so that a node's pick among candidates does not depend
on the order in which candidates were seen.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _key_to_int(key: int | str) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    digest = hashlib.blake2b(str(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorised splitmix64 finaliser over a uint64 array."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        z = z ^ (z >> np.uint64(31))
    return z


@dataclass(frozen=True)
class RandomSource:
    master_seed: int

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")

    def _sequence(self, key: int | str) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=(_key_to_int(key),))

    def stream(self, key: int | str) -> np.random.Generator:
        """Independent generator for sub-stream `key`; same seed and key give the same draws."""
        return np.random.Generator(np.random.PCG64(self._sequence(key)))

    def derive_seed(self, key: int | str) -> int:
        return int(self._sequence(key).generate_state(1, np.uint64)[0])

    def node_salts(self, n: int, key: int | str = "nodes") -> np.ndarray:
        """One 64-bit salt per node; node v's private randomness is keyed by salts[v]."""
        return self._sequence(key).generate_state(n, np.uint64)


def choice_keys(salts: np.ndarray, tag: int, candidates: np.ndarray) -> np.ndarray:
    """Pseudo-random uint64 keys for (actor salt, decision tag, candidate id).

    Choosing the candidate with the smallest key is a uniform draw from the
    candidate set and needs only the current best id in memory.
    """
    salts = np.asarray(salts, dtype=np.uint64)
    cand = np.asarray(candidates).astype(np.uint64)
    inner = splitmix64(cand ^ np.uint64(_key_to_int(tag)))
    return splitmix64(salts ^ inner)


def group_argmin(groups: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Index of the smallest key within each group, ordered by ascending group value."""
    groups = np.asarray(groups)
    if groups.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((keys, groups))
    g = groups[order]
    first = np.ones(g.size, dtype=bool)
    first[1:] = g[1:] != g[:-1]
    return order[first]
