"""Distributed Hamiltonian cycle construction: labels, node state and phases."""

from hamring.hamcycle.labels import beta_max, midpoint_label, reflect_label, spacing, wrap_bound, wrap_label
from hamring.hamcycle.protocol import RunConfig, Simulation, schedule
from hamring.hamcycle.run import RunMetrics, collect_metrics, run_algorithm, simulate

__all__ = [
    "RunConfig",
    "RunMetrics",
    "Simulation",
    "beta_max",
    "midpoint_label",
    "reflect_label",
    "collect_metrics",
    "run_algorithm",
    "schedule",
    "simulate",
    "spacing",
    "wrap_bound",
    "wrap_label",
]
