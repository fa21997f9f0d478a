import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hamring.hamcycle.protocol as protocol
from hamring.congest import Kind
from hamring.errors import CycleNotClosed, DiameterExceeded, FailureCause, NoResponder
from hamring.graphgen import Graph, gen_gnp
from hamring.hamcycle import RunConfig, Simulation, run_algorithm, schedule, simulate, spacing
from hamring.randomness import RandomSource
from hamring.verify import structural_violations, verify_cycle

from conftest import ring


def fresh(graph, seed=0, **cfg):
    return Simulation(graph, RandomSource(seed), RunConfig(**cfg))


def install_cycle(sim, order, labels):
    st = sim.st
    for a, b, lab in zip(order, order[1:] + order[:1], labels):
        st.next[a] = b
        st.prev[b] = a
        st.set_label(a, lab)


def test_preprocessing_k3():
    sim = fresh(Graph.complete(3))
    sim.preprocessing()
    assert sim.engine.round == 9
    assert sim.st.parent.tolist() == [-1, 0, 0]
    assert sim.st.known_n.tolist() == [3, 3, 3]


def test_preprocessing_star():
    sim = fresh(Graph.from_edges(5, [(0, i) for i in range(1, 5)]))
    sim.preprocessing()
    assert sim.engine.round == 9
    assert sim.st.depth.tolist() == [0, 1, 1, 1, 1]
    assert set(sim.st.known_n.tolist()) == {5}


def test_preprocessing_depth_three_tree():
    # 0 - 1 - 2 - 3 with a pendant 4 on node 2
    sim = fresh(Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (2, 4)]))
    sim.preprocessing()
    assert sim.st.depth.tolist() == [0, 1, 2, 3, 3]
    assert sim.st.parent.tolist() == [-1, 0, 1, 2, 2]
    assert set(sim.st.known_n.tolist()) == {5}


def test_parent_is_smallest_frontier_sender():
    sim = fresh(Graph.from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (1, 4)]))
    sim.preprocessing()
    assert sim.st.parent[3] == 1 and sim.st.parent[4] == 1


def test_diameter_exceeded():
    path = Graph.from_edges(6, [(i, i + 1) for i in range(5)])
    with pytest.raises(DiameterExceeded):
        fresh(path).preprocessing()


def test_phase0_k16():
    sim = fresh(Graph.complete(16))
    sim.preprocessing()
    sim.phase0()
    assert sim.engine.round - 9 == 33
    assert sim.path_length == 12
    order = sim.st.cycle_order()
    assert len(order) == 12
    assert [sim.st.labels[v] for v in order] == [k * spacing(16) for k in range(12)]
    assert structural_violations(sim.graph, sim.st, 0, closed=False) == []


def test_phase0_isolated_v0():
    g = Graph.from_edges(6, [(1, 2), (2, 3), (3, 4), (4, 5)])
    sim = fresh(g)
    with pytest.raises(NoResponder):
        sim.phase0()
    assert sim.engine.round == 2


def test_phase1_k16_closes_immediately():
    sim = fresh(Graph.complete(16))
    sim.preprocessing()
    sim.phase0()
    start = sim.engine.round
    sim.phase1()
    assert sim.engine.round - start == 12
    assert sim.st.cycle_size() == 13
    assert verify_cycle(sim.graph, sim.st).is_closed
    assert sim.engine.kind_counts[Kind.PHASE1_APPOINT] == 1
    assert sim.engine.kind_counts[Kind.PHASE1_CLOSE] == 1


def test_phase1_on_a_path_never_closes():
    path = Graph.from_edges(40, [(i, i + 1) for i in range(39)])
    sim = fresh(path)
    sim.phase0()
    with pytest.raises(CycleNotClosed):
        sim.phase1()


def test_small_complete_graph_closes_directly(k8):
    sim, halt = simulate(k8, RandomSource(4))
    assert halt is None
    # target path length min(3 log n, n) covers all eight nodes
    assert sim.size_after_phase1 == 8
    assert verify_cycle(k8, sim.st).is_hamiltonian


def test_phase1_cycle_size_bound():
    for seed in range(5):
        g = gen_gnp(300, 0.3, RandomSource(seed))
        sim = fresh(g, seed)
        sim.preprocessing()
        sim.phase0()
        sim.phase1()
        L = 9
        assert 3 * L + 1 <= sim.st.cycle_size() <= 4 * L
        assert structural_violations(g, sim.st) == []


def _forced_choices(forced):
    """choice_keys replacement: key 0 for the forced candidate of each actor, 1 otherwise."""

    def keys(salts, tag, candidates):
        purpose = (tag >> 32) & 0xFF
        table = forced.get(purpose, {})
        salts = np.broadcast_to(np.asarray(salts, dtype=np.uint64), np.shape(candidates))
        return np.array(
            [0 if table.get(int(a)) == int(c) else 1 for a, c in zip(salts, candidates)], dtype=np.uint64
        )

    return keys


def test_middle_phase_k5_every_branch(monkeypatch):
    """Triangle 0-1-2 inside K5, nodes 3 and 4 outside: enumerate every choice."""
    g = Graph.complete(5)
    S = spacing(5)
    outcomes = set()
    for w3, w4 in itertools.product(range(3), repeat=2):
        invites = {3: w3, 4: w4}
        targets = {x: (w - 1) % 3 for x, w in invites.items()}
        collide = targets[3] == targets[4]
        winners = [3, 4] if collide else [None]
        for winner in winners:
            accept = {targets[3]: winner} if collide else {targets[3]: 3, targets[4]: 4}
            forced = {protocol._MID_X: invites, protocol._MID_U: accept}
            monkeypatch.setattr(protocol, "choice_keys", _forced_choices(forced))
            sim = fresh(g)
            sim.salts = np.arange(5, dtype=np.uint64)
            install_cycle(sim, [0, 1, 2], [0, S, 2 * S])
            sim.middle_phase(0)
            assert structural_violations(g, sim.st) == []
            size = sim.st.cycle_size()
            assert size == (4 if collide else 5)
            if collide:
                assert sim.st.next[winner] != -1
                assert sim.st.next[7 - winner] == -1
            outcomes.add((w3, w4, winner, tuple(sim.st.cycle_order())))
            assert sim.engine.round == 3
    assert len(outcomes) == 12


def test_middle_phase_without_candidates():
    # 0..5 ring, node 6 adjacent to 0 and 3 only: no two consecutive cycle nodes
    g = ring(6, [(6, 0), (6, 3), (0, 3)])
    sim = fresh(g)
    S = spacing(7)
    install_cycle(sim, list(range(6)), [k * S for k in range(6)])
    before = sim.st.next.copy()
    sim.middle_phase(0)
    assert np.array_equal(before, sim.st.next)
    assert sim.engine.round == 3
    assert Kind.MID_I2 not in sim.engine.kind_counts


def test_middle_phase_wraps_behind_max():
    # node 4 only fits between the last cycle node 3 and v0
    g = ring(4, [(4, 3), (4, 0)])
    sim = fresh(g)
    S = spacing(5)
    install_cycle(sim, [0, 1, 2, 3], [0, S, 2 * S, 3 * S])
    sim.middle_phase(0)
    assert sim.st.cycle_order() == [0, 1, 2, 3, 4]
    assert sim.st.labels[4] == -(-(3 * S + sim.U) // 2)
    assert structural_violations(g, sim.st) == []


def _reversal_graph():
    # ring 0..7, chord 2-7, node 8 adjacent to the nodes labelled S, 3S and 6S;
    # chord 0-4 keeps the diameter at 3 without opening another integration
    return ring(8, [(2, 7), (0, 4), (8, 1), (8, 3), (8, 6)])


def test_final_phase_reversal_example():
    g = _reversal_graph()
    sim = fresh(g)
    sim.preprocessing()
    S = sim.S
    install_cycle(sim, list(range(8)), [k * S for k in range(8)])
    sim.final_phase(0)
    assert sim.engine.round == 9 + 11
    order = sim.st.cycle_order()
    # edges (1,2) and (6,7) replaced by (1,8), (8,6), (2,7); segment 2..6 reversed
    assert order == [0, 1, 8, 6, 5, 4, 3, 2, 7]
    rep = verify_cycle(g, sim.st)
    assert rep.is_hamiltonian and rep.ascending and rep.links_consistent
    labels = [sim.st.labels[v] for v in order]
    assert labels[3:8] == [2 * S + 6 * S - k * S for k in (6, 5, 4, 3, 2)]
    assert labels[2] == -(-(S + 2 * S) // 2)
    # w4 = 6 sits at depth 2: offer sent in rounds 5 and 6, v0 selects in round 7
    assert sim.engine.watched_sends[Kind.SELECT_BROADCAST] == [9 + 7]
    assert sim.final_insertions == 1


def test_final_phase_triangle_splice():
    g = ring(6, [(6, 2), (6, 3), (0, 3)])
    sim = fresh(g)
    sim.preprocessing()
    S = sim.S
    install_cycle(sim, list(range(6)), [k * S for k in range(6)])
    sim.final_phase(0)
    order = sim.st.cycle_order()
    assert order == [0, 1, 2, 6, 3, 4, 5]
    # no reflection: every old label survives
    assert [sim.st.labels[v] for v in (0, 1, 2, 3, 4, 5)] == [k * S for k in range(6)]
    assert sim.st.labels[6] == 5 * S // 2
    assert verify_cycle(g, sim.st).is_hamiltonian


def test_final_phase_triangle_before_v0():
    g = ring(5, [(5, 4), (5, 0), (0, 2)])
    sim = fresh(g)
    sim.preprocessing()
    S = sim.S
    install_cycle(sim, list(range(5)), [k * S for k in range(5)])
    sim.final_phase(0)
    assert sim.st.cycle_order() == [0, 1, 2, 3, 4, 5]
    assert sim.st.labels[5] == -(-(4 * S + sim.U) // 2)
    assert verify_cycle(g, sim.st).is_hamiltonian


def test_final_phase_idle_when_complete(k8):
    sim = fresh(k8)
    sim.preprocessing()
    install_cycle(sim, list(range(8)), [k * sim.S for k in range(8)])
    sim.final_phase(0)
    assert sim.engine.round == 20 and sim.engine.messages_total == sim.engine.report().messages_total
    assert Kind.FIN_I1 not in sim.engine.kind_counts


def test_final_phase_no_option_leaves_cycle_unchanged():
    # node 6 hangs off node 0 only
    g = ring(6, [(6, 0), (0, 3)])
    sim = fresh(g)
    sim.preprocessing()
    install_cycle(sim, list(range(6)), [k * sim.S for k in range(6)])
    sim.final_phase(0)
    assert sim.st.cycle_size() == 6
    assert Kind.OFFER not in sim.engine.kind_counts
    assert Kind.SELECT_BROADCAST not in sim.engine.kind_counts


@pytest.mark.parametrize("n", [8, 16, 64])
def test_schedule_exact_on_complete_graphs(n):
    m = run_algorithm(Graph.complete(n), RandomSource(1))
    L = (n - 1).bit_length()
    assert m.success and m.failure_cause is None
    assert m.rounds_total == 9 + 3 * (3 * L - 1) + 3 * L + 48 * L + 33 * L
    assert m.rounds_per_phase == schedule(n)
    assert m.invariant_violations == []


def test_edgeless_graph_records_no_responder():
    m = run_algorithm(Graph(8, np.zeros((8, 8), dtype=bool)), RandomSource(0))
    assert not m.success and m.failure_cause == FailureCause.NO_RESPONDER.value
    assert m.rounds_total == 9 + 2


def test_runs_are_deterministic():
    g = gen_gnp(200, 0.2, RandomSource(3))
    a = simulate(g, RandomSource(3), RunConfig(retention="full"))[0]
    b = simulate(g, RandomSource(3), RunConfig(retention="full"))[0]
    assert a.engine.transcript.dumps() == b.engine.transcript.dumps()
    assert a.st.cycle_order() == b.st.cycle_order()
    c = simulate(g, RandomSource(4), RunConfig(retention="full"))[0]
    assert c.st.cycle_order() != a.st.cycle_order()


def test_full_and_audit_retention_agree():
    g = gen_gnp(120, 0.15, RandomSource(8))
    full = run_algorithm(g, RandomSource(8), RunConfig(retention="full", middle_phases=3))
    lean = run_algorithm(g, RandomSource(8), RunConfig(middle_phases=3))
    assert full == lean


def test_forced_final_phases_serialise():
    g = gen_gnp(256, 0.12, RandomSource(2))
    sim, halt = simulate(g, RandomSource(2), RunConfig(retention="full", middle_phases=3))
    assert halt is None
    assert sim.outside_before_final > 0
    assert sim.final_insertions > 0
    assert max(sim.selects_per_final_phase) == 1
    assert sim.violations == []
    sizes = [sim.n - sim.outside_before_final]
    finals = sim.engine.transcript.phases[-1]
    assert finals[0] == "final"
    rounds = sim.engine.watched_sends[Kind.SELECT_BROADCAST]
    assert len(rounds) == sim.final_insertions
    assert all(finals[1] < r <= finals[2] for r in rounds)
    assert len({(r - finals[1] - 1) // 11 for r in rounds}) == len(rounds)
    assert sizes[0] + sim.final_insertions == sim.st.cycle_size()


def test_trajectory_is_monotone():
    g = gen_gnp(512, 0.1, RandomSource(6))
    m = run_algorithm(g, RandomSource(6))
    sizes = [m.cycle_size_after_phase1] + m.cycle_size_after_each_middle_phase
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))
    assert m.invariant_violations == []


def test_invariants_on_random_runs():
    for seed in range(6):
        g = gen_gnp(150, 0.2, RandomSource(seed))
        m = run_algorithm(g, RandomSource(seed), RunConfig(middle_phases=2 + seed))
        assert m.invariant_violations == []
        assert m.max_selects_per_final_phase <= 1
        assert m.max_message_bits <= 32 * 8
        assert m.max_node_memory_bits <= 40 * 8


def test_rejects_tiny_graphs():
    with pytest.raises(ValueError):
        fresh(Graph.complete(2))


@settings(max_examples=25, deadline=None)
@given(st.integers(12, 90), st.floats(0.15, 0.9), st.integers(0, 6), st.integers(0, 2**32))
def test_property_phases_keep_list_and_numbering(n, p, mids, seed):
    g = gen_gnp(n, p, RandomSource(seed))
    m = run_algorithm(g, RandomSource(seed), RunConfig(middle_phases=mids))
    assert m.invariant_violations == []
    assert m.max_selects_per_final_phase <= 1
    assert m.rounds_total == sum(schedule(n, mids).values()) or m.failure_cause not in (None, "Incomplete")
    if m.success:
        assert m.min_label_gap_final >= 2
    sizes = [m.cycle_size_after_phase1] + m.cycle_size_after_each_middle_phase
    assert all(a <= b for a, b in zip(sizes[:-1], sizes[1:]) if a is not None)
