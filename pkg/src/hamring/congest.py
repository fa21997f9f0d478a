"""Synchronous CONGEST round executor with bit-exact message accounting.

Messages are submitted in batches, one batch per (kind, round).  A batch is
either a set of unicasts over graph edges or a set of local broadcasts, where
every sender reaches all of its neighbours and each copy counts as a message.
Messages handed to :meth:`Engine.step_round` in round r come back as the inbox
for round r + 1; nothing sent in a round can be read within it.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from hamring.graphgen import Graph, log2ceil


class Kind(enum.IntEnum):
    PHASE0_INVITE = 0
    PHASE0_RESPONSE = 1
    PHASE0_APPOINT = 2
    PHASE1_INVITE = 3
    PHASE1_RESPONSE = 4
    PHASE1_APPOINT = 5
    PHASE1_CLOSE = 6
    MID_I1 = 7
    MID_I2 = 8
    MID_I3 = 9
    FIN_I1 = 10
    FIN_I2 = 11
    FIN_I3 = 12
    FIN_NOTIFY = 13
    OFFER = 14
    SELECT_BROADCAST = 15
    BFS_FLOOD = 16
    COUNT_UP = 17
    COUNT_DOWN = 18
    # successor's label handed to its predecessor before a middle-phase splice
    MID_LABEL = 19
    # new predecessor pointer for the old successor after a middle-phase splice
    MID_RELINK = 20
    # label for a node integrated in a final phase, sent by its new predecessor
    FIN_LABEL = 21


class FieldType(enum.Enum):
    ID = "id"
    LABEL = "label"
    FLAG = "flag"


def label_width(value: int) -> int:
    """Bits needed for a label value (at least one)."""
    return max(1, int(value).bit_length())


@dataclass(frozen=True)
class Message:
    """A single message with typed fields; ids are ⌈log2 n⌉ bits wide."""

    kind: Kind
    fields: tuple[tuple[FieldType, int], ...] = ()

    def bit_size(self, n: int) -> int:
        id_bits = log2ceil(n)
        total = 0
        for ftype, value in self.fields:
            if ftype is FieldType.ID:
                total += id_bits
            elif ftype is FieldType.LABEL:
                total += label_width(value)
            else:
                total += 1
        return total


@dataclass
class Batch:
    """Messages of one kind sent in one round.

    ``receivers is None`` marks local broadcasts.  ``bits`` is per sender row;
    ``data`` holds payload columns aligned with ``senders``.
    """

    kind: Kind
    senders: np.ndarray
    receivers: np.ndarray | None
    bits: np.ndarray
    data: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.senders = np.asarray(self.senders, dtype=np.int64).reshape(-1)
        if self.receivers is not None:
            self.receivers = np.asarray(self.receivers, dtype=np.int64).reshape(-1)
            if self.receivers.shape != self.senders.shape:
                raise ValueError("senders and receivers must align")
        self.bits = np.broadcast_to(np.asarray(self.bits, dtype=np.int64), self.senders.shape).copy()

    @classmethod
    def unicast(cls, kind: Kind, senders, receivers, bits, **data) -> Batch:
        return cls(kind, senders, receivers, bits, data)

    @classmethod
    def broadcast(cls, kind: Kind, senders, bits, **data) -> Batch:
        return cls(kind, senders, None, bits, data)

    @classmethod
    def from_messages(cls, n: int, triples: Sequence[tuple[int, int, Message]]) -> list[Batch]:
        """Group explicit (sender, receiver, Message) triples into unicast batches."""
        by_kind: dict[Kind, list[tuple[int, int, Message]]] = {}
        for s, r, m in triples:
            by_kind.setdefault(m.kind, []).append((s, r, m))
        out = []
        for kind, rows in by_kind.items():
            out.append(
                cls.unicast(
                    kind,
                    [s for s, _, _ in rows],
                    [r for _, r, _ in rows],
                    [m.bit_size(n) for _, _, m in rows],
                    message=[m for _, _, m in rows],
                )
            )
        return out

    def __len__(self) -> int:
        return int(self.senders.size)

    @property
    def is_broadcast(self) -> bool:
        return self.receivers is None


class EdgeViolation(RuntimeError):
    """A message addressed a node that is not a neighbour of its sender."""


class MessageTooLarge(RuntimeError):
    """A message exceeded the configured per-message bit cap."""


@dataclass
class AuditReport:
    max_message_bits: int
    max_node_memory_bits: int
    rounds_total: int
    rounds_per_phase: dict[str, int]
    id_bits: int
    messages_total: int = 0

    @property
    def message_ratio(self) -> float:
        return self.max_message_bits / max(1, self.id_bits)

    @property
    def memory_ratio(self) -> float:
        return self.max_node_memory_bits / max(1, self.id_bits)


@dataclass
class TranscriptLog:
    """Per-message record ``(round, sender, receiver, kind, bits)`` plus phase boundaries.

    On disk, ``#`` lines carry n, the coordinator id, the round count and the
    phase boundaries; every other line is one message.
    """

    n: int = 0
    watch: int | None = None
    entries: list[tuple[int, int, int, Kind, int]] = field(default_factory=list)
    phases: list[tuple[str, int, int]] = field(default_factory=list)
    rounds: int = 0

    def lines(self) -> Iterable[str]:
        yield f"#n,{self.n}"
        if self.watch is not None:
            yield f"#v0,{self.watch}"
        yield f"#rounds,{self.rounds}"
        for name, start, stop in self.phases:
            yield f"#phase,{name},{start},{stop}"
        for r, s, t, kind, bits in self.entries:
            yield f"{r},{s},{t},{kind.name},{bits}"

    def write(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        for line in self.lines():
            buf.write(line + "\n")
        return buf.getvalue()


def read_transcript(path) -> TranscriptLog:
    log = TranscriptLog()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                if parts[0] == "#n":
                    log.n = int(parts[1])
                elif parts[0] == "#v0":
                    log.watch = int(parts[1])
                elif parts[0] == "#rounds":
                    log.rounds = int(parts[1])
                elif parts[0] == "#phase":
                    log.phases.append((parts[1], int(parts[2]), int(parts[3])))
                elif parts[0].startswith("#"):
                    continue
                else:
                    r, s, t, kind, bits = parts
                    log.entries.append((int(r), int(s), int(t), Kind[kind], int(bits)))
            except (ValueError, KeyError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed transcript line {line!r}") from exc
    return log


def audit_message_bits(log: TranscriptLog | Iterable[tuple], n: int) -> dict[str, float]:
    """Largest message in a transcript and its size in units of ⌈log2 n⌉."""
    entries = log.entries if isinstance(log, TranscriptLog) else log
    max_bits = 0
    for entry in entries:
        max_bits = max(max_bits, int(entry[4]))
    id_bits = log2ceil(n)
    return {"max_message_bits": max_bits, "ratio": max_bits / max(1, id_bits)}


class Engine:
    """Round counter, edge discipline, bit cap, audits and optional transcript."""

    def __init__(
        self,
        graph: Graph,
        *,
        retention: str = "audit",
        bit_cap: int | None = None,
        watch: int | None = None,
    ):
        if retention not in ("audit", "full"):
            raise ValueError(f"retention must be 'audit' or 'full', got {retention!r}")
        self.graph = graph
        self.n = graph.n
        self.id_bits = log2ceil(graph.n)
        self.bit_cap = 32 * self.id_bits if bit_cap is None else bit_cap
        self.retention = retention
        self.round = 0
        self.max_message_bits = 0
        self.max_node_memory_bits = 0
        self.messages_total = 0
        self.kind_counts: dict[Kind, int] = {}
        self.transcript = TranscriptLog(n=graph.n, watch=watch) if retention == "full" else None
        # rounds in which the watched node (the coordinator) sent each kind
        self.watch = watch
        self.watched_sends: dict[Kind, list[int]] = {}
        self._phase: tuple[str, int] | None = None
        self.phase_log: list[tuple[str, int, int]] = []

    # -- phases ---------------------------------------------------------
    def begin_phase(self, name: str) -> None:
        if self._phase is not None:
            raise RuntimeError(f"phase {self._phase[0]!r} still open")
        self._phase = (name, self.round)

    def end_phase(self) -> None:
        if self._phase is None:
            raise RuntimeError("no open phase")
        name, start = self._phase
        self.phase_log.append((name, start, self.round))
        if self.transcript is not None:
            self.transcript.phases.append((name, start, self.round))
        self._phase = None

    def rounds_per_phase(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for name, start, stop in self.phase_log:
            out[name] = out.get(name, 0) + (stop - start)
        if self._phase is not None:
            name, start = self._phase
            out[name] = out.get(name, 0) + (self.round - start)
        return out

    # -- rounds ---------------------------------------------------------
    def step_round(self, outbox: Iterable[Batch] = ()) -> list[Batch]:
        """Validate and log everything sent this round; return it as next round's inbox."""
        self.round += 1
        delivered = []
        for batch in outbox:
            if len(batch) == 0:
                continue
            self._account(batch)
            delivered.append(batch)
        if self.transcript is not None:
            self.transcript.rounds = self.round
        return delivered

    def idle(self, rounds: int) -> None:
        for _ in range(rounds):
            self.step_round(())

    def observe_memory(self, bits: np.ndarray | int) -> None:
        peak = int(np.max(bits)) if np.size(bits) else 0
        if peak > self.max_node_memory_bits:
            self.max_node_memory_bits = peak

    def _account(self, batch: Batch) -> None:
        senders = batch.senders
        if batch.is_broadcast:
            counts = self.graph.degree[senders]
        else:
            ok = self.graph.matrix[senders, batch.receivers]
            if not ok.all():
                bad = int(np.flatnonzero(~ok)[0])
                raise EdgeViolation(
                    f"round {self.round}: {batch.kind.name} from {senders[bad]} "
                    f"to non-neighbour {batch.receivers[bad]}"
                )
            counts = np.ones(senders.size, dtype=np.int64)
        live = counts > 0
        if live.any():
            peak = int(batch.bits[live].max())
            if peak > self.bit_cap:
                raise MessageTooLarge(
                    f"round {self.round}: {batch.kind.name} of {peak} bits exceeds cap {self.bit_cap}"
                )
            self.max_message_bits = max(self.max_message_bits, peak)
        sent = int(counts.sum())
        self.messages_total += sent
        self.kind_counts[batch.kind] = self.kind_counts.get(batch.kind, 0) + sent
        if self.watch is not None and sent and np.any(senders[live] == self.watch):
            rounds = self.watched_sends.setdefault(batch.kind, [])
            if not rounds or rounds[-1] != self.round:
                rounds.append(self.round)
        if self.transcript is not None:
            self._record(batch)

    def _record(self, batch: Batch) -> None:
        entries = self.transcript.entries
        r = self.round
        if batch.is_broadcast:
            for s, b in zip(batch.senders.tolist(), batch.bits.tolist()):
                for t in self.graph.neighbors(s).tolist():
                    entries.append((r, s, t, batch.kind, b))
        else:
            for s, t, b in zip(batch.senders.tolist(), batch.receivers.tolist(), batch.bits.tolist()):
                entries.append((r, s, t, batch.kind, b))

    def report(self) -> AuditReport:
        return AuditReport(
            max_message_bits=self.max_message_bits,
            max_node_memory_bits=self.max_node_memory_bits,
            rounds_total=self.round,
            rounds_per_phase=self.rounds_per_phase(),
            id_bits=self.id_bits,
            messages_total=self.messages_total,
        )


def inbox_for(inbox: Sequence[Batch], node: int, graph: Graph) -> list[tuple[int, Kind, dict]]:
    """Messages a single node reads this round: ``(sender, kind, payload row)``.

    Convenience for tests and small examples; the phase code works on whole
    batches instead.
    """
    out = []
    for batch in inbox:
        if batch.is_broadcast:
            hits = np.flatnonzero(graph.matrix[batch.senders, node])
        else:
            hits = np.flatnonzero(batch.receivers == node)
        for i in hits.tolist():
            row = {k: (v[i] if hasattr(v, "__getitem__") else v) for k, v in batch.data.items()}
            out.append((int(batch.senders[i]), batch.kind, row))
    out.sort(key=lambda item: item[0])
    return out


def audit_node_memory(states) -> int:
    """Largest persistent footprint, in bits, over all nodes of a state table."""
    bits = states.memory_bits()
    return int(np.max(bits)) if np.size(bits) else 0
