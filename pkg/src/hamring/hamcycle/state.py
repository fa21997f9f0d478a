"""Per-node algorithm state, stored column-wise for all nodes at once."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hamring.graphgen import log2ceil

NONE = -1

# is_v0, end-of-path, pending close, coordinator decided
FLAG_BITS = 4
# BFS depth is at most 3
DEPTH_BITS = 2


@dataclass
class NodeStates:
    n: int
    v0: int
    total_rounds: int
    next: np.ndarray = field(init=False)
    prev: np.ndarray = field(init=False)
    parent: np.ndarray = field(init=False)
    depth: np.ndarray = field(init=False)
    known_n: np.ndarray = field(init=False)
    labels: list = field(init=False)
    label_bits: np.ndarray = field(init=False)
    scratch_bits: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n = self.n
        self.next = np.full(n, NONE, dtype=np.int64)
        self.prev = np.full(n, NONE, dtype=np.int64)
        self.parent = np.full(n, NONE, dtype=np.int64)
        self.depth = np.full(n, NONE, dtype=np.int64)
        self.known_n = np.zeros(n, dtype=np.int64)
        self.labels = [None] * n
        self.label_bits = np.zeros(n, dtype=np.int64)
        self.scratch_bits = np.zeros(n, dtype=np.int64)

    @property
    def id_bits(self) -> int:
        return log2ceil(self.n)

    def set_label(self, v: int, value: int | None) -> None:
        self.labels[v] = value
        self.label_bits[v] = 0 if value is None else max(1, int(value).bit_length())

    def on_cycle(self) -> np.ndarray:
        return self.next != NONE

    def cycle_order(self) -> list[int]:
        """Nodes in next-order starting at v0 (stops on repeat)."""
        order = [self.v0]
        seen = {self.v0}
        cur = int(self.next[self.v0])
        while cur != NONE and cur not in seen:
            order.append(cur)
            seen.add(cur)
            cur = int(self.next[cur])
        return order

    def cycle_size(self) -> int:
        return int(np.count_nonzero(self.next != NONE))

    def memory_bits(self) -> np.ndarray:
        """Persistent bits per node: four id registers, label, n, round counter, flags, scratch."""
        ids = self.id_bits
        fixed = 4 * ids + (ids + 1) + max(1, self.total_rounds.bit_length()) + DEPTH_BITS + FLAG_BITS
        return fixed + self.label_bits + self.scratch_bits

    def clear_scratch(self) -> None:
        self.scratch_bits[:] = 0
