"""Command line entry point: ``hamring run | verify | oracle``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from hamring.graphgen import gen_gnp, p_formula
from hamring.hamcycle.protocol import RunConfig
from hamring.hamcycle.run import run_algorithm
from hamring.harness import ExperimentConfig, audit_transcript, emit, emit_string, run_batch
from hamring.randomness import RandomSource
from hamring.verify import ORACLE_MAX_N, exact_hamiltonian


def _p_arg(text: str) -> str | float:
    if text == "formula":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'formula' or a probability, got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"p must lie in [0, 1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamring", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="seeded batch of runs on G(n, p)")
    run.add_argument("--n", type=int, nargs="+", required=True, help="node counts (each at least 8)")
    run.add_argument("--p", type=_p_arg, default="formula", help="'formula' or an explicit edge probability")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, default=0, help="master seed")
    run.add_argument("--out", default="-", help="output file, '-' for stdout")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--retention", choices=("audit", "full"), default="audit")
    run.add_argument("--transcripts", help="directory for per-trial transcripts (with --retention full)")
    run.add_argument("--summary", action="store_true", help="print per-n summaries to stderr")

    ver = sub.add_parser("verify", help="replay the audits on a stored transcript")
    ver.add_argument("--transcript", required=True)
    ver.add_argument("--n", type=int, help="node count, if the transcript lacks it")

    orc = sub.add_parser("oracle", help="exact Hamiltonicity check against one run")
    orc.add_argument("--n", type=int, required=True)
    orc.add_argument("--p", type=_p_arg, required=True)
    orc.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    config = ExperimentConfig(
        n_list=args.n,
        p_mode=args.p,
        trials=args.trials,
        master_seed=args.seed,
        output_path=None if args.out == "-" else args.out,
        transcript_retention=args.retention,
        run=RunConfig(retention=args.retention),
    )
    transcripts = args.transcripts
    if args.retention == "full" and transcripts is None:
        base = Path(args.out) if args.out != "-" else Path("hamring")
        transcripts = str(base.with_suffix("")) + "_transcripts"
    results, summaries = run_batch(config, transcripts)
    if args.out == "-":
        sys.stdout.write(emit_string(results, args.format))
    else:
        emit(results, args.format, args.out)
    if args.summary:
        for row in summaries:
            print(json.dumps(asdict(row), sort_keys=True), file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    audit = audit_transcript(args.transcript, args.n)
    print(f"messages            {audit.messages}")
    print(f"rounds              {audit.rounds}")
    for name, rounds in audit.rounds_per_phase.items():
        print(f"  {name:<18}{rounds}")
    print(f"max message bits    {audit.max_message_bits} ({audit.ratio:.2f} x ceil(log2 n))")
    print(f"within 32 log n cap {'yes' if audit.within_cap else 'NO'}")
    print(f"selects per final   {audit.max_selects_per_final_phase}")
    return 0 if audit.ok else 1


def _cmd_oracle(args) -> int:
    if not 3 <= args.n <= ORACLE_MAX_N:
        print(f"oracle needs 3 <= n <= {ORACLE_MAX_N}", file=sys.stderr)
        return 2
    p = p_formula(args.n) if args.p == "formula" else args.p
    src = RandomSource(args.seed)
    graph = gen_gnp(args.n, p, src)
    exact = exact_hamiltonian(graph)
    metrics = run_algorithm(graph, src, p=p)
    print(f"graph               n={graph.n} m={graph.edge_count} p={p}")
    print(f"exact hamiltonian   {str(exact).lower()}")
    print(f"algorithm success   {str(metrics.success).lower()} ({metrics.failure_cause or 'ok'})")
    if metrics.success and not exact:
        print("inconsistent: algorithm certified a cycle the oracle rules out", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_oracle(args)
    except (OSError, ValueError) as exc:
        print(f"hamring: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
