"""Node behaviour of the cycle construction, executed round by round.

Each phase advances the shared :class:`~hamring.congest.Engine` by exactly its
budgeted number of rounds.  Handlers are written over all nodes at once
(numpy columns) but every node only reads its own state, its neighbour ids
and its inbox, and every value that crosses an edge is sent as a message.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from hamring.congest import Batch, Engine, Kind, label_width
from hamring.errors import CycleNotClosed, DiameterExceeded, NoResponder
from hamring.graphgen import Graph, log2ceil
from hamring.hamcycle.labels import midpoint_label, spacing, wrap_bound, wrap_label
from hamring.hamcycle.state import DEPTH_BITS, NONE, NodeStates
from hamring.randomness import RandomSource, choice_keys, group_argmin
from hamring.verify import structural_violations

PREPROCESSING_ROUNDS = 9
MIDDLE_PHASE_ROUNDS = 3
FINAL_PHASE_ROUNDS = 11

# decision-tag purpose codes
_P0, _P1, _MID_X, _MID_U, _TRI, _W3, _W4, _V0 = range(8)


def schedule(n: int, middle_phases: int | None = None, final_phases: int | None = None) -> dict[str, int]:
    """Fixed round budget of every phase for n nodes."""
    L = log2ceil(n)
    mids = 16 * L if middle_phases is None else middle_phases
    fins = 3 * L if final_phases is None else final_phases
    return {
        "preprocessing": PREPROCESSING_ROUNDS,
        "phase0": 3 * (3 * L - 1),
        "phase1": 3 * L,
        "middle": MIDDLE_PHASE_ROUNDS * mids,
        "final": FINAL_PHASE_ROUNDS * fins,
    }


@dataclass
class RunConfig:
    retention: str = "audit"
    bit_cap: int | None = None
    check_invariants: bool = True
    # experiment knobs; None keeps the standard 16⌈log2 n⌉ / 3⌈log2 n⌉ phase counts
    middle_phases: int | None = None
    final_phases: int | None = None
    v0: int = 0


class Offer(NamedTuple):
    v: int
    w1: int
    w2: int
    w4: int
    w3: int
    f: int
    l: int
    triangle: bool


class Simulation:
    def __init__(self, graph: Graph, src: RandomSource, config: RunConfig | None = None):
        self.config = config or RunConfig()
        self.graph = graph
        self.seed = src.master_seed
        self.n = graph.n
        if self.n < 3:
            raise ValueError(f"need at least 3 nodes, got {self.n}")
        self.A = graph.matrix
        self.L = log2ceil(self.n)
        self.S = spacing(self.n)
        self.U = wrap_bound(self.n)
        self.v0 = self.config.v0
        self.budget = schedule(self.n, self.config.middle_phases, self.config.final_phases)
        self.total_rounds = sum(self.budget.values())
        self.engine = Engine(graph, retention=self.config.retention, bit_cap=self.config.bit_cap, watch=self.v0)
        self.st = NodeStates(self.n, self.v0, self.total_rounds)
        self.salts = src.node_salts(self.n, "algorithm")
        self.path_end = self.v0
        self.path_length = 0
        self.size_after_phase1: int | None = None
        self.trajectory: list[int] = []
        self.outside_before_final: int | None = None
        self.final_insertions = 0
        self.selects_per_final_phase: list[int] = []
        self.violations: list[str] = []

    # -- helpers ---------------------------------------------------------
    def tick(self, outbox=()) -> list[Batch]:
        inbox = self.engine.step_round(outbox)
        self.engine.observe_memory(self.st.memory_bits())
        return inbox

    def idle(self, rounds: int) -> None:
        for _ in range(rounds):
            self.tick(())

    def tag(self, purpose: int, extra: int = 0) -> int:
        return (self.engine.round << 40) | (purpose << 32) | extra

    def pick(self, actor: int, candidates: np.ndarray, purpose: int) -> int:
        keys = choice_keys(np.full(candidates.size, self.salts[actor]), self.tag(purpose), candidates)
        return int(candidates[int(np.argmin(keys))])

    def ids(self, k: int) -> int:
        return k * self.L

    def check(self, phase: str, closed: bool = True) -> None:
        if not self.config.check_invariants:
            return
        if self.st.scratch_bits.any():
            self.violations.append(f"{phase}: scratch not cleared at phase end")
        for problem in structural_violations(self.graph, self.st, self.v0, closed=closed):
            self.violations.append(f"{phase}: {problem}")

    # -- driver ----------------------------------------------------------
    def run(self) -> None:
        eng = self.engine
        eng.begin_phase("preprocessing")
        self.preprocessing()
        eng.end_phase()

        eng.begin_phase("phase0")
        self.phase0()
        eng.end_phase()
        self.check("phase0", closed=False)

        eng.begin_phase("phase1")
        self.phase1()
        eng.end_phase()
        self.size_after_phase1 = self.st.cycle_size()
        self.check("phase1")

        mids = self.budget["middle"] // MIDDLE_PHASE_ROUNDS
        eng.begin_phase("middle")
        for i in range(mids):
            self.middle_phase(i)
            self.trajectory.append(self.st.cycle_size())
            self.check(f"middle[{i}]")
        eng.end_phase()

        fins = self.budget["final"] // FINAL_PHASE_ROUNDS
        self.outside_before_final = self.n - self.st.cycle_size()
        eng.begin_phase("final")
        for i in range(fins):
            before = len(eng.watched_sends.get(Kind.SELECT_BROADCAST, []))
            self.final_phase(i)
            after = len(eng.watched_sends.get(Kind.SELECT_BROADCAST, []))
            self.selects_per_final_phase.append(after - before)
            self.check(f"final[{i}]")
        eng.end_phase()

    # -- pre-processing: BFS tree, then everyone learns n ------------------
    def preprocessing(self) -> None:
        st, A, v0, L = self.st, self.A, self.v0, self.L
        st.depth[v0] = 0
        frontier = np.array([v0], dtype=np.int64)
        for r in range(1, 4):
            self.tick([Batch.broadcast(Kind.BFS_FLOOD, frontier, DEPTH_BITS)])
            unreached = np.flatnonzero(st.depth == NONE)
            if frontier.size and unreached.size:
                hit = A[np.ix_(unreached, frontier)]
                got = hit.any(axis=1)
                fresh = unreached[got]
                # ties go to the smallest sender id
                st.parent[fresh] = frontier[hit[got].argmax(axis=1)]
                st.depth[fresh] = r
                frontier = fresh
            else:
                frontier = np.zeros(0, dtype=np.int64)
        if self.graph.degree[v0] == 0:
            # nothing to aggregate; v0 learns of its isolation from the first silent invitation
            self.idle(6)
            return
        if np.any(st.depth == NONE):
            missing = int(np.count_nonzero(st.depth == NONE))
            raise DiameterExceeded(f"{missing} nodes not reached by the flood within 3 rounds")

        subtree = np.ones(self.n, dtype=np.int64)
        st.scratch_bits[:] = L + 1
        for d in (3, 2, 1):
            senders = np.flatnonzero(st.depth == d)
            self.tick([Batch.unicast(Kind.COUNT_UP, senders, st.parent[senders], L + 1, count=subtree[senders])])
            np.add.at(subtree, st.parent[senders], subtree[senders])
        st.known_n[v0] = subtree[v0]
        st.scratch_bits[:] = 0
        for d in (1, 2, 3):
            senders = np.flatnonzero(st.depth == d - 1)
            self.tick([Batch.broadcast(Kind.COUNT_DOWN, senders, L + 1, count=st.known_n[senders])])
            receivers = np.flatnonzero(st.depth == d)
            st.known_n[receivers] = st.known_n[st.parent[receivers]]

    # -- phase 0: random path of 3⌈log2 n⌉ nodes from v0 -----------------------
    def phase0(self) -> None:
        st, v0, L = self.st, self.v0, self.L
        st.next[v0] = st.prev[v0] = v0
        st.set_label(v0, 0)
        end, length = v0, 1
        target = min(3 * L, self.n)
        for _ in range(3 * L - 1):
            if length >= target:
                self.idle(3)
                continue
            self.tick([Batch.broadcast(Kind.PHASE0_INVITE, [end], self.ids(1))])
            nbrs = self.graph.neighbors(end)
            responders = nbrs[st.next[nbrs] == NONE]
            self.tick([Batch.unicast(Kind.PHASE0_RESPONSE, responders, np.full(responders.size, end), self.ids(1))])
            if responders.size == 0:
                raise NoResponder(f"phase 0: path end {end} got no response at length {length}")
            w = self.pick(end, responders, _P0)
            label = st.labels[end] + self.S
            st.next[end] = w
            self.tick([Batch.unicast(Kind.PHASE0_APPOINT, [end], [w], self.ids(1) + label_width(label))])
            st.prev[w], st.next[w] = end, v0
            st.set_label(w, label)
            end, length = w, length + 1
        self.path_end, self.path_length = end, length

    # -- phase 1: close the path into a cycle --------------------------------
    def phase1(self) -> None:
        st, A, v0, L = self.st, self.A, self.v0, self.L
        end, length = self.path_end, self.path_length
        closed, closer = False, NONE
        for it in range(1, L + 1):
            if closed:
                self.idle(3)
                continue
            if closer != NONE or length == self.n:
                if closer == NONE:
                    if not A[end, v0]:
                        raise CycleNotClosed(f"path covers all nodes but end {end} is not adjacent to v0")
                    closer = end
                self.tick([Batch.unicast(Kind.PHASE1_CLOSE, [closer], [v0], self.ids(1))])
                st.prev[v0] = closer
                closed = True
                self.idle(2)
                continue
            if it == L:
                # a closing appointment now could not reach v0 within the budget
                self.idle(3)
                continue
            self.tick([Batch.broadcast(Kind.PHASE1_INVITE, [end], self.ids(1))])
            nbrs = self.graph.neighbors(end)
            responders = nbrs[st.next[nbrs] == NONE]
            near_v0 = A[responders, v0]
            self.tick([Batch.unicast(Kind.PHASE1_RESPONSE, responders, np.full(responders.size, end), self.ids(1) + 1)])
            if responders.size == 0:
                raise NoResponder(f"phase 1: path end {end} got no response")
            closing = bool(near_v0.any())
            w = self.pick(end, responders[near_v0] if closing else responders, _P1)
            label = st.labels[end] + self.S
            st.next[end] = w
            self.tick([Batch.unicast(Kind.PHASE1_APPOINT, [end], [w], self.ids(1) + 1 + label_width(label))])
            st.prev[w], st.next[w] = end, v0
            st.set_label(w, label)
            if closing:
                closer = w
            else:
                end, length = w, length + 1
        if not closed:
            raise CycleNotClosed(f"no closure after {L} iterations")

    # -- middle phases: concurrent single-edge insertions --------------------
    def middle_phase(self, index: int) -> None:
        st, A, L, v0 = self.st, self.A, self.L, self.v0
        cyc = np.flatnonzero(st.next != NONE)
        off = np.flatnonzero(st.next == NONE)

        # round 1: each cycle node announces (own id, predecessor id)
        self.tick([Batch.broadcast(Kind.MID_I1, cyc, self.ids(2), pred=st.prev[cyc])])

        # round 2: off-cycle nodes invite the predecessor of a random candidate;
        # cycle nodes pass their label back to their predecessor
        outbox = [Batch.unicast(Kind.MID_LABEL, cyc, st.prev[cyc], st.label_bits[cyc])]
        inviters = targets = np.zeros(0, dtype=np.int64)
        if off.size and cyc.size:
            cand = A[np.ix_(off, cyc)] & A[np.ix_(off, st.prev[cyc])]
            xi, wj = np.nonzero(cand)
            if xi.size:
                actors, ws = off[xi], cyc[wj]
                keys = choice_keys(self.salts[actors], self.tag(_MID_X), ws)
                sel = group_argmin(actors, keys)
                inviters, targets = actors[sel], st.prev[ws[sel]]
                outbox.append(Batch.unicast(Kind.MID_I2, inviters, targets, self.ids(1)))
        self.tick(outbox)

        # round 3: each invited node accepts one inviter and splices it in
        if inviters.size == 0:
            self.tick()
            return
        keys = choice_keys(self.salts[targets], self.tag(_MID_U), inviters)
        sel = group_argmin(targets, keys)
        us, xs = targets[sel], inviters[sel]
        ws = st.next[us]
        new_labels = []
        for u, w in zip(us.tolist(), ws.tolist()):
            if w == v0:
                new_labels.append(wrap_label(st.labels[u], self.U))
            else:
                new_labels.append(midpoint_label(st.labels[u], st.labels[w]))
        widths = np.array([label_width(x) for x in new_labels], dtype=np.int64)
        st.next[us] = xs
        self.tick(
            [
                Batch.unicast(Kind.MID_I3, us, xs, self.ids(1) + widths, succ=ws),
                Batch.unicast(Kind.MID_RELINK, us, ws, self.ids(1), new=xs),
            ]
        )
        st.prev[xs], st.next[xs] = us, ws
        st.prev[ws] = xs
        for x, lab in zip(xs.tolist(), new_labels):
            st.set_label(x, lab)

    # -- final phases: coordinator-serialised insertion with reversal ------------
    def _offer_bits(self, offer: Offer) -> tuple[int, int]:
        # carried as two fragments: (v, w1, w2, w4, w3, triangle, part, f) and (v, part, l)
        return self.ids(5) + 2 + label_width(offer.f), self.ids(1) + 1 + label_width(offer.l)

    def _send_offers(self, holders: dict[int, list[Offer]], outbox: list[Batch]) -> dict[int, list[Offer]]:
        """Each holder forwards the offer with the smallest candidate id to its BFS parent."""
        st = self.st
        arrived: dict[int, list[Offer]] = {}
        senders, receivers, bits_a, bits_b = [], [], [], []
        for node in sorted(holders):
            if node == self.v0:
                arrived.setdefault(node, []).extend(holders[node])
                continue
            best = min(holders[node], key=lambda o: o.v)
            parent = int(st.parent[node])
            a, b = self._offer_bits(best)
            senders.append(node)
            receivers.append(parent)
            bits_a.append(a)
            bits_b.append(b)
            arrived.setdefault(parent, []).append(best)
        if senders:
            outbox.append(Batch.unicast(Kind.OFFER, senders, receivers, bits_a))
            outbox.append(Batch.unicast(Kind.OFFER, senders, receivers, bits_b))
        return arrived

    def final_phase(self, index: int) -> None:
        st, A, L, v0 = self.st, self.A, self.L, self.v0
        off = np.flatnonzero(st.next == NONE)
        if off.size == 0:
            self.idle(FINAL_PHASE_ROUNDS)
            return
        cyc = np.flatnonzero(st.next != NONE)
        order = sorted(cyc.tolist(), key=lambda v: st.labels[v])
        rank = np.full(self.n, -1, dtype=np.int64)
        rank[order] = np.arange(len(order))

        # round 1: every off-cycle node announces itself
        self.tick([Batch.broadcast(Kind.FIN_I1, off, self.ids(1))])

        # round 2: each cycle neighbour w1 of x tells its successor w2 about x
        xi, ci = np.nonzero(A[np.ix_(off, cyc)])
        px, pw1 = off[xi], cyc[ci]
        pw2 = st.next[pw1]
        self.tick([Batch.unicast(Kind.FIN_I2, pw1, pw2, self.ids(1), x=px)])

        # round 3: w2 either sees a triangle (x adjacent to w1 and w2) or asks
        # its neighbours for a w3 whose predecessor w4 is adjacent to x
        outbox: list[Batch] = []
        tri = A[px, pw2]
        holders: dict[int, list[Offer]] = {}
        if tri.any():
            tx, tw1, tw2 = px[tri], pw1[tri], pw2[tri]
            sel = group_argmin(tw2, choice_keys(self.salts[tw2], self.tag(_TRI), tx))
            for i in sel.tolist():
                w1, w2 = int(tw1[i]), int(tw2[i])
                f = st.labels[w2]
                holders.setdefault(w2, []).append(Offer(int(tx[i]), w1, w2, w1, w2, f, f, True))
        open_ = ~tri & (pw2 != v0)
        i3_x, i3_w1, i3_w2 = px[open_], pw1[open_], pw2[open_]
        if i3_w2.size:
            outbox.append(
                Batch.broadcast(Kind.FIN_I3, i3_w2, self.ids(2) + st.label_bits[i3_w2], x=i3_x, w1=i3_w1)
            )
        arrived = self._send_offers(holders, outbox)
        self.tick(outbox)

        # round 4: w3 keeps one (x, w2) per x with label(w2) below its own and
        # hands it to its predecessor w4
        notify = self._w3_choices(i3_x, i3_w1, i3_w2, cyc, rank)
        decision: Offer | None = None
        decision_round = None
        for rnd in range(4, FINAL_PHASE_ROUNDS + 1):
            outbox = []
            holders = dict(arrived)
            arrived = {}
            coordinator_pool = holders.pop(v0, []) if decision is None else []
            holders.pop(v0, None)
            if rnd == 4 and notify is not None:
                w3s, xs, w1s, w2s = notify
                w4s = st.prev[w3s]
                fbits = st.label_bits[w2s]
                outbox.append(Batch.unicast(Kind.FIN_NOTIFY, w3s, w4s, self.ids(3) + fbits, x=xs))
                notify = (w3s, xs, w1s, w2s, w4s)
            if rnd == 5 and notify is not None and decision is None:
                # once v0 has decided, late offers would only be discarded
                self._w4_offers(notify, holders)
            if coordinator_pool:
                keys = choice_keys(
                    np.full(len(coordinator_pool), self.salts[v0]),
                    self.tag(_V0),
                    np.array([o.v for o in coordinator_pool]),
                )
                decision = coordinator_pool[int(np.argmin(keys))]
                decision_round = rnd
            if decision is not None:
                self._select_round(decision, rnd - decision_round, outbox)
            arrived = self._send_offers(holders, outbox) if decision is None else {}
            self.tick(outbox)
        if decision is not None:
            self._select_round(decision, FINAL_PHASE_ROUNDS + 1 - decision_round, None)
            if st.labels[decision.v] is None:
                raise RuntimeError("integrated node never received its label")
            self.final_insertions += 1

    def _w3_choices(self, i3_x, i3_w1, i3_w2, cyc, rank):
        st, A, v0 = self.st, self.A, self.v0
        if i3_x.size == 0:
            return None
        out_w3, out_x, out_w1, out_w2 = [], [], [], []
        for x in np.unique(i3_x).tolist():
            m = i3_x == x
            w2s, w1s = i3_w2[m], i3_w1[m]
            reach = A[np.ix_(cyc, w2s)]
            below = (rank[w2s][None, :] < rank[cyc][:, None]) | (cyc == v0)[:, None]
            not_pred = w2s[None, :] != st.prev[cyc][:, None]
            rows, cols = np.nonzero(reach & below & not_pred)
            if rows.size == 0:
                continue
            w3 = cyc[rows]
            keys = choice_keys(self.salts[w3], self.tag(_W3, x), w2s[cols])
            sel = group_argmin(rows, keys)
            out_w3.append(w3[sel])
            out_x.append(np.full(sel.size, x, dtype=np.int64))
            out_w1.append(w1s[cols[sel]])
            out_w2.append(w2s[cols[sel]])
        if not out_w3:
            return None
        w3s = np.concatenate(out_w3)
        order = np.argsort(w3s, kind="stable")
        return (
            w3s[order],
            np.concatenate(out_x)[order],
            np.concatenate(out_w1)[order],
            np.concatenate(out_w2)[order],
        )

    def _w4_offers(self, notify, holders: dict[int, list[Offer]]) -> None:
        st, A = self.st, self.A
        w3s, xs, w1s, w2s, w4s = notify
        ok = A[xs, w4s]
        if not ok.any():
            return
        w3s, xs, w1s, w2s, w4s = w3s[ok], xs[ok], w1s[ok], w2s[ok], w4s[ok]
        sel = group_argmin(w4s, choice_keys(self.salts[w4s], self.tag(_W4), xs))
        for i in sel.tolist():
            w4 = int(w4s[i])
            f, l = st.labels[int(w2s[i])], st.labels[w4]
            if not 0 < f < l:
                raise AssertionError(f"offer interval [{f}, {l}] is not inside (0, max]")
            holders.setdefault(w4, []).append(
                Offer(int(xs[i]), int(w1s[i]), int(w2s[i]), w4, int(w3s[i]), f, l, False)
            )

    def _select_round(self, offer: Offer, hop: int, outbox: list[Batch] | None) -> None:
        """Nodes at BFS depth `hop` apply the selected integration and pass it on."""
        st, v0 = self.st, self.v0
        if hop > 3 + 1:
            return
        if hop == 0:
            appliers = np.array([v0], dtype=np.int64)
        elif hop <= 3:
            appliers = np.flatnonzero(st.depth == hop)
        else:
            appliers = np.zeros(0, dtype=np.int64)
        if outbox is not None and hop < 3:
            senders = appliers
            if senders.size:
                a, b = self._offer_bits(offer)
                outbox.append(Batch.broadcast(Kind.SELECT_BROADCAST, senders, a))
                outbox.append(Batch.broadcast(Kind.SELECT_BROADCAST, senders, b))
        # label for v from w1, sent the round after w1 applied
        w1 = offer.w1
        w1_hop = int(st.depth[w1])
        if hop == w1_hop + 1:
            st.set_label(offer.v, self._pending_label)
        if appliers.size == 0:
            return
        self._apply(offer, appliers)
        if w1 in set(appliers.tolist()):
            if offer.triangle and offer.w2 == v0:
                label = wrap_label(st.labels[w1], self.U)
            else:
                label = midpoint_label(st.labels[w1], offer.f)
            self._pending_label = label
            if outbox is None:
                raise RuntimeError("label message would leave the phase")
            outbox.append(Batch.unicast(Kind.FIN_LABEL, [w1], [offer.v], label_width(label)))

    def _apply(self, offer: Offer, appliers: np.ndarray) -> None:
        st = self.st
        v, w1, w2, w4, w3 = offer.v, offer.w1, offer.w2, offer.w4, offer.w3
        if not offer.triangle:
            on = appliers[st.next[appliers] != NONE]
            f, l = offer.f, offer.l
            seg = [u for u in on.tolist() if f <= st.labels[u] <= l]
            for u in seg:
                st.set_label(u, f + l - st.labels[u])
            if seg:
                seg_arr = np.array(seg, dtype=np.int64)
                st.next[seg_arr], st.prev[seg_arr] = st.prev[seg_arr].copy(), st.next[seg_arr].copy()
        here = set(appliers.tolist())
        if offer.triangle:
            if w1 in here:
                st.next[w1] = v
            if v in here:
                st.prev[v], st.next[v] = w1, w2
            if w2 in here:
                st.prev[w2] = v
        else:
            if w1 in here:
                st.next[w1] = v
            if v in here:
                st.prev[v], st.next[v] = w1, w4
            if w4 in here:
                st.prev[w4] = v
            if w2 in here:
                st.next[w2] = w3
            if w3 in here:
                st.prev[w3] = w2
