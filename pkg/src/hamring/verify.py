"""Algorithm-independent checkers.

These read pointer and label arrays directly and never look at messages, so
they cannot inherit bookkeeping mistakes from the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from hamring.graphgen import Graph

NONE = -1
ORACLE_MAX_N = 20


@dataclass(frozen=True)
class CycleReport:
    n: int
    is_closed: bool
    covers_all: bool
    edges_exist: bool
    length: int
    min_gap: int | None
    ascending: bool
    links_consistent: bool

    @property
    def is_hamiltonian(self) -> bool:
        return self.is_closed and self.covers_all and self.edges_exist and self.length == self.n

    @property
    def defects(self) -> list[str]:
        out = []
        for name in ("is_closed", "covers_all", "edges_exist", "ascending", "links_consistent"):
            if not getattr(self, name):
                out.append(name)
        if self.length != self.n:
            out.append(f"length {self.length} != {self.n}")
        return out


def _pointers(states: Any) -> tuple[list[int], list[int] | None, list | None]:
    if isinstance(states, dict):
        nxt, prv, labels = states["next"], states.get("prev"), states.get("labels")
    else:
        nxt, prv, labels = states.next, getattr(states, "prev", None), getattr(states, "labels", None)
    to_list = lambda a: None if a is None else [(-1 if x is None else int(x)) for x in a]  # noqa: E731
    return to_list(nxt), to_list(prv), (None if labels is None else list(labels))


def _walk(nxt: Sequence[int], v0: int, limit: int) -> tuple[list[int], bool]:
    order = [v0]
    cur = nxt[v0]
    for _ in range(limit):
        if cur == v0:
            return order, True
        if cur < 0 or cur >= len(nxt):
            return order, False
        order.append(cur)
        cur = nxt[cur]
    return order, False


def verify_cycle(graph: Graph, states: Any, v0: int = 0) -> CycleReport:
    """Walk next pointers from v0 for at most n + 1 steps and report every defect."""
    n = graph.n
    nxt, prv, labels = _pointers(states)
    order, closed = _walk(nxt, v0, n + 1)
    distinct = len(set(order)) == len(order)
    closed = closed and distinct
    hops = list(zip(order, order[1:] + ([v0] if closed else [])))
    edges_exist = all(0 <= b < n and graph.matrix[a, b] for a, b in hops)
    covers_all = closed and distinct and len(order) == n
    links = prv is not None and closed and all(prv[b] == a for a, b in hops)

    ascending, min_gap = False, None
    if labels is not None and all(labels[v] is not None for v in order):
        values = [int(labels[v]) for v in order]
        diffs = [b - a for a, b in zip(values, values[1:])]
        ascending = values[0] == 0 and all(d > 0 for d in diffs)
        min_gap = min(diffs) if diffs else None
    return CycleReport(
        n=n,
        is_closed=closed,
        covers_all=covers_all,
        edges_exist=edges_exist,
        length=len(order) if closed else 0,
        min_gap=min_gap,
        ascending=ascending,
        links_consistent=links,
    )


def verify_numbering(states: Any, v0: int = 0) -> tuple[bool, bool, int | None]:
    """(ascending from 0, pairwise distinct, smallest consecutive gap) along the cycle."""
    nxt, _, labels = _pointers(states)
    order, _ = _walk(nxt, v0, len(nxt) + 1)
    return numbering_of([labels[v] for v in order])


def numbering_of(values: Sequence[int | None]) -> tuple[bool, bool, int | None]:
    if any(v is None for v in values):
        return False, False, None
    values = [int(v) for v in values]
    diffs = [b - a for a, b in zip(values, values[1:])]
    ascending = bool(values) and values[0] == 0 and all(d > 0 for d in diffs)
    distinct = len(set(values)) == len(values)
    return ascending, distinct, (min(diffs) if diffs else None)


def structural_violations(graph: Graph, states: Any, v0: int = 0, *, closed: bool = True) -> list[str]:
    """Everything wrong with the current cycle (or open path when ``closed`` is False)."""
    nxt, prv, labels = _pointers(states)
    n = graph.n
    out: list[str] = []
    on = [v for v in range(n) if nxt[v] != NONE]
    for v in range(n):
        has_label = labels is not None and labels[v] is not None
        if (nxt[v] != NONE) != has_label:
            out.append(f"node {v}: on-cycle={nxt[v] != NONE} but labelled={has_label}")
        if nxt[v] == NONE and prv is not None and prv[v] != NONE:
            out.append(f"node {v}: off-cycle node holds prev={prv[v]}")

    if closed:
        order, ok = _walk(nxt, v0, n + 1)
        if not ok:
            out.append("next pointers do not return to v0")
        if sorted(order) != sorted(on):
            out.append(f"walk visits {len(order)} nodes, {len(on)} are on the cycle")
        hops = list(zip(order, order[1:] + [v0]))
        if prv is not None:
            for a, b in hops:
                if prv[b] != a:
                    out.append(f"prev[{b}]={prv[b]} but next[{a}]={b}")
                    break
    else:
        # open path from v0; the last node points back to v0 provisionally
        order, _ = _walk(nxt, v0, n + 1)
        hops = list(zip(order, order[1:]))
        if sorted(order) != sorted(on):
            out.append(f"path visits {len(order)} nodes, {len(on)} are on it")
        if prv is not None:
            for a, b in hops:
                if prv[b] != a:
                    out.append(f"prev[{b}]={prv[b]} but next[{a}]={b}")
                    break
    for a, b in hops:
        if not graph.matrix[a, b]:
            out.append(f"cycle hop ({a},{b}) is not a graph edge")
            break
    if labels is not None:
        ascending, distinct, _ = numbering_of([labels[v] for v in order])
        if not ascending:
            out.append("labels do not ascend from 0 along the cycle")
        if not distinct:
            out.append("labels are not pairwise distinct")
    return out


def exact_hamiltonian(graph: Graph) -> bool:
    """Exhaustive subset DP: does the graph contain a Hamiltonian cycle?"""
    n = graph.n
    if n > ORACLE_MAX_N:
        raise ValueError(f"exact oracle supports n <= {ORACLE_MAX_N}, got {n}")
    if n < 3:
        return False
    adj = graph.matrix
    # paths start at node 0; masks range over nodes 1..n-1, bit i-1 for node i
    m = n - 1
    nbr = np.zeros(m, dtype=np.int64)
    for i in range(1, n):
        for j in range(1, n):
            if adj[i, j]:
                nbr[i - 1] |= 1 << (j - 1)
    # ends[mask] = bitset of end nodes of 0-rooted paths covering exactly mask
    ends = np.zeros(1 << m, dtype=np.int64)
    for i in range(1, n):
        if adj[0, i]:
            ends[1 << (i - 1)] = 1 << (i - 1)
    masks = np.arange(1 << m, dtype=np.int64)
    popcount = np.zeros(1 << m, dtype=np.int64)
    for b in range(m):
        popcount += (masks >> b) & 1
    for size in range(1, m):
        layer = masks[popcount == size]
        layer = layer[ends[layer] != 0]
        if layer.size == 0:
            return False
        e = ends[layer]
        for u in range(m):
            bit = 1 << u
            free = (layer & bit) == 0
            reach = free & ((e & nbr[u]) != 0)
            if reach.any():
                ends[layer[reach] | bit] |= bit
    full = (1 << m) - 1
    closing = 0
    for i in range(1, n):
        if adj[0, i]:
            closing |= 1 << (i - 1)
    return bool(ends[full] & closing)
