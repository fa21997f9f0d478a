"""Seed sweeps over G(n, p), metric aggregation and CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from hamring.congest import Kind, TranscriptLog, read_transcript
from hamring.graphgen import gen_gnp, log2ceil, p_formula
from hamring.hamcycle.protocol import FINAL_PHASE_ROUNDS, RunConfig
from hamring.hamcycle.run import RunMetrics, collect_metrics, run_algorithm, simulate
from hamring.randomness import RandomSource

CSV_FIELDS = (
    "n",
    "p",
    "seed",
    "success",
    "failure_cause",
    "rounds_total",
    "max_message_bits",
    "max_node_memory_bits",
    "min_label_gap_final",
    "final_phase_insertions",
)


@dataclass
class ExperimentConfig:
    n_list: Sequence[int] = (256, 512, 1024, 2048)
    # "formula" or an explicit probability
    p_mode: str | float = "formula"
    trials: int = 100
    master_seed: int = 0
    output_path: str | None = None
    transcript_retention: str = "audit"
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.n_list:
            raise ValueError("n_list is empty")
        for n in self.n_list:
            if n < 8:
                raise ValueError(f"every n must be at least 8, got {n}")
        if self.p_mode != "formula":
            p = float(self.p_mode)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p must lie in [0, 1], got {p}")
        if self.transcript_retention not in ("audit", "full"):
            raise ValueError(f"unknown retention {self.transcript_retention!r}")

    def p_for(self, n: int) -> float:
        return p_formula(n) if self.p_mode == "formula" else float(self.p_mode)


@dataclass
class SummaryRow:
    n: int
    p: float
    trials: int
    successes: int
    success_rate: float
    median_growth_small: float | None
    median_growth_by_phase: list[float]
    max_message_bits: int
    max_node_memory_bits: int
    failure_counts: dict[str, int]


def trial_seed(master_seed: int, trial: int) -> int:
    return RandomSource(master_seed).derive_seed(trial)


def run_single(
    n: int,
    p: float,
    seed: int,
    config: RunConfig | None = None,
    transcript_path: str | os.PathLike | None = None,
) -> RunMetrics:
    """Sample G(n, p) from `seed` and run the algorithm on it with the same seed."""
    src = RandomSource(seed)
    graph = gen_gnp(n, p, src)
    if transcript_path is None:
        return run_algorithm(graph, src, config, p=p)
    config = replace(config or RunConfig(), retention="full")
    sim, halt = simulate(graph, src, config)
    sim.engine.transcript.write(transcript_path)
    return collect_metrics(sim, halt, p=p)


def small_regime_growth(metrics: RunMetrics) -> list[float]:
    """Growth factors of middle phases that start with 3⌈log2 n⌉ < |C| < n/7."""
    lo, hi = 3 * log2ceil(metrics.n), metrics.n / 7
    return [g for size, g in metrics.growth_factors if lo < size < hi]


def summarize(n: int, p: float, rows: Sequence[RunMetrics]) -> SummaryRow:
    successes = sum(1 for r in rows if r.success)
    small = [g for r in rows for g in small_regime_growth(r)]
    by_phase: list[float] = []
    depth = max((len(r.growth_factors) for r in rows), default=0)
    for i in range(depth):
        values = [r.growth_factors[i][1] for r in rows if len(r.growth_factors) > i]
        by_phase.append(statistics.median(values))
    failures: dict[str, int] = {}
    for r in rows:
        if r.failure_cause:
            failures[r.failure_cause] = failures.get(r.failure_cause, 0) + 1
    return SummaryRow(
        n=n,
        p=p,
        trials=len(rows),
        successes=successes,
        success_rate=successes / len(rows),
        median_growth_small=statistics.median(small) if small else None,
        median_growth_by_phase=by_phase,
        max_message_bits=max(r.max_message_bits for r in rows),
        max_node_memory_bits=max(r.max_node_memory_bits for r in rows),
        failure_counts=dict(sorted(failures.items())),
    )


def run_batch(
    config: ExperimentConfig, transcript_dir: str | os.PathLike | None = None
) -> tuple[list[RunMetrics], list[SummaryRow]]:
    results: list[RunMetrics] = []
    summaries: list[SummaryRow] = []
    full = config.transcript_retention == "full"
    if full and transcript_dir is not None:
        Path(transcript_dir).mkdir(parents=True, exist_ok=True)
    for n in config.n_list:
        p = config.p_for(n)
        rows = []
        for i in range(config.trials):
            path = None
            if full and transcript_dir is not None:
                path = Path(transcript_dir) / f"n{n}_trial{i}.transcript"
            rows.append(run_single(n, p, trial_seed(config.master_seed, i), config.run, path))
        results.extend(rows)
        summaries.append(summarize(n, p, rows))
    return results, summaries


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_string(results: Sequence[RunMetrics], fmt: str) -> str:
    if not results:
        raise ValueError("no results to emit")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in results:
            writer.writerow([_csv_value(getattr(r, name)) for name in CSV_FIELDS])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected csv or json")


def emit(results: Sequence[RunMetrics], fmt: str, path: str | os.PathLike) -> Path:
    """Write results to `path`; nothing is created when there is nothing to write."""
    text = emit_string(results, fmt)
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc
    return path


def load_json(path: str | os.PathLike) -> list[RunMetrics]:
    with open(path) as fh:
        return [RunMetrics(**row) for row in json.load(fh)]


@dataclass
class TranscriptAudit:
    n: int
    messages: int
    rounds: int
    max_message_bits: int
    ratio: float
    within_cap: bool
    rounds_per_phase: dict[str, int]
    max_selects_per_final_phase: int
    kind_counts: dict[str, int]

    @property
    def ok(self) -> bool:
        return self.within_cap and self.max_selects_per_final_phase <= 1


def audit_transcript(source: TranscriptLog | str | os.PathLike, n: int | None = None) -> TranscriptAudit:
    """Recompute message-size and serialisation audits from a stored transcript."""
    log = source if isinstance(source, TranscriptLog) else read_transcript(source)
    n = n or log.n
    if not n:
        raise ValueError("transcript carries no node count; pass n explicitly")
    L = log2ceil(n)
    max_bits = max((e[4] for e in log.entries), default=0)
    kinds: dict[str, int] = {}
    for e in log.entries:
        kinds[e[3].name] = kinds.get(e[3].name, 0) + 1
    per_phase: dict[str, int] = {}
    for name, start, stop in log.phases:
        per_phase[name] = per_phase.get(name, 0) + stop - start
    selects = 0
    v0 = log.watch if log.watch is not None else 0
    coordinator_rounds = {e[0] for e in log.entries if e[3] is Kind.SELECT_BROADCAST and e[1] == v0}
    for name, start, stop in log.phases:
        if name != "final":
            continue
        for block in range(start, stop, FINAL_PHASE_ROUNDS):
            hits = sum(1 for r in coordinator_rounds if block < r <= block + FINAL_PHASE_ROUNDS)
            selects = max(selects, hits)
    return TranscriptAudit(
        n=n,
        messages=len(log.entries),
        rounds=log.rounds,
        max_message_bits=max_bits,
        ratio=max_bits / L,
        within_cap=max_bits <= 32 * L,
        rounds_per_phase=per_phase,
        max_selects_per_final_phase=selects,
        kind_counts=dict(sorted(kinds.items())),
    )
