"""One complete execution on a graph, condensed into metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from hamring.errors import AlgorithmHalt, FailureCause
from hamring.graphgen import Graph
from hamring.hamcycle.protocol import RunConfig, Simulation
from hamring.randomness import RandomSource
from hamring.verify import verify_cycle


@dataclass
class RunMetrics:
    n: int
    p: float | None
    seed: int | None
    success: bool
    failure_cause: str | None
    rounds_total: int
    rounds_per_phase: dict[str, int]
    cycle_size_after_phase1: int | None
    cycle_size_after_each_middle_phase: list[int]
    outside_before_final: int | None
    final_phase_insertions: int
    max_message_bits: int
    max_node_memory_bits: int
    min_label_gap_final: int | None
    messages_total: int
    max_selects_per_final_phase: int
    failure_detail: str = ""
    invariant_violations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def growth_factors(self) -> list[tuple[int, float]]:
        """(size before, size after / size before) for every middle phase."""
        sizes = [self.cycle_size_after_phase1] + self.cycle_size_after_each_middle_phase
        return [(a, b / a) for a, b in zip(sizes, sizes[1:]) if a]


def simulate(graph: Graph, src: RandomSource, config: RunConfig | None = None) -> tuple[Simulation, AlgorithmHalt | None]:
    """Run the protocol; a halt is returned rather than raised."""
    sim = Simulation(graph, src, config)
    try:
        sim.run()
    except AlgorithmHalt as halt:
        return sim, halt
    return sim, None


def run_algorithm(
    graph: Graph,
    src: RandomSource,
    config: RunConfig | None = None,
    *,
    p: float | None = None,
) -> RunMetrics:
    sim, halt = simulate(graph, src, config)
    return collect_metrics(sim, halt, p=p)


def collect_metrics(sim: Simulation, halt: AlgorithmHalt | None, *, p: float | None = None) -> RunMetrics:
    graph = sim.graph
    report = verify_cycle(graph, sim.st, sim.v0)
    audit = sim.engine.report()
    if halt is not None:
        cause, detail = halt.cause.value, halt.detail
    elif report.is_hamiltonian:
        cause, detail = None, ""
    else:
        cause = FailureCause.INCOMPLETE.value
        detail = f"{graph.n - sim.st.cycle_size()} nodes left outside the cycle"
    return RunMetrics(
        n=graph.n,
        p=p,
        seed=sim.seed,
        success=cause is None,
        failure_cause=cause,
        rounds_total=audit.rounds_total,
        rounds_per_phase=audit.rounds_per_phase,
        cycle_size_after_phase1=sim.size_after_phase1,
        cycle_size_after_each_middle_phase=list(sim.trajectory),
        outside_before_final=sim.outside_before_final,
        final_phase_insertions=sim.final_insertions,
        max_message_bits=audit.max_message_bits,
        max_node_memory_bits=audit.max_node_memory_bits,
        min_label_gap_final=report.min_gap if report.is_closed else None,
        messages_total=audit.messages_total,
        max_selects_per_final_phase=max(sim.selects_per_final_phase, default=0),
        failure_detail=detail,
        invariant_violations=list(sim.violations),
    )
