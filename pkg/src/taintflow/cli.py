"""``taintflow`` command line: analyze, oracle, gen, check."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from taintflow import DEFAULT_K, __version__
from taintflow.access_path import KConfig, render
from taintflow.callgraph import build_callgraph
from taintflow.client import DEFAULT_SPEC, AnalysisConfig, Finding, load_spec, render_json, render_text, run_analysis
from taintflow.errors import BudgetExceeded, TaintflowError
from taintflow.frontend import format_program, load_program
from taintflow.solver import DEFAULT_BUDGET, EXTERNAL_MODELS

EXIT_CLEAN, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="taintflow", description="Demand-driven backward taint analysis.")
    parser.add_argument("--version", action="version", version=f"taintflow {__version__} (default k={DEFAULT_K})")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def analysis_args(p):
        p.add_argument("inputs", nargs="+", type=Path, help="IR files, linked into one program")
        p.add_argument("--spec", type=Path, help="taint specification JSON (default: built-in XSS spec)")
        p.add_argument("--k", type=_positive, default=DEFAULT_K, help="access-path length limit")
        p.add_argument("--external-model", choices=EXTERNAL_MODELS, default="taint-through")
        p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET, help="worklist pops per query")
        p.add_argument("--format", choices=("json", "text"), default="json")

    a = sub.add_parser("analyze", help="run the backward analysis")
    analysis_args(a)
    a.add_argument("--no-skip-identity", action="store_true", help="disable identity-chain skipping")
    a.add_argument("--dump-summaries", action="store_true", help="print computed summaries to stderr")
    a.add_argument("--dump-callgraph", action="store_true", help="print call edges to stderr")
    a.add_argument("--trace-flows", action="store_true", help="log every flow-function application to stderr")
    a.add_argument("--jobs", type=_positive, default=1, help="queries solved in parallel")

    o = sub.add_parser("oracle", help="run the exhaustive forward reference analysis")
    analysis_args(o)

    g = sub.add_parser("gen", help="generate random test programs")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=_positive, default=1)
    g.add_argument("--methods", type=int, default=6)
    g.add_argument("--blocks", type=int, default=4)
    g.add_argument("--fields", type=int, default=3)
    g.add_argument("--no-loops", action="store_true")
    g.add_argument("--out", type=Path, help="directory for seed files and spec.json (default: stdout)")

    c = sub.add_parser("check", help="parse and SSA-validate only")
    c.add_argument("inputs", nargs="+", type=Path)
    c.add_argument("--print-ssa", action="store_true", help="print the program in SSA form")
    return parser


def _load(args):
    spec = load_spec(args.spec) if args.spec is not None else DEFAULT_SPEC
    return load_program(*args.inputs), spec


def _report(findings: list[Finding], program, fmt: str) -> None:
    out = render_json(findings) if fmt == "json" else render_text(findings, program)
    sys.stdout.write(out)


def _flow_logger(stmt_id, incoming, case, outgoing) -> None:
    facts = ", ".join(render(f) for f in outgoing)
    print(f"flow {stmt_id} {render(incoming)} {case} -> {{{facts}}}", file=sys.stderr)


def cmd_analyze(args) -> int:
    program, spec = _load(args)
    callgraph = build_callgraph(program)
    if args.dump_callgraph:
        for line in callgraph.dump():
            print(line, file=sys.stderr)
    config = AnalysisConfig(
        k=args.k,
        skip_identity=not args.no_skip_identity,
        external_model=args.external_model,
        budget=args.budget,
        # flow logs must come out in a deterministic order
        jobs=1 if args.trace_flows else args.jobs,
        tracer=_flow_logger if args.trace_flows else None,
    )
    run = run_analysis(program, spec, config, callgraph)
    if args.dump_summaries:
        for line in run.summary_lines():
            print(line, file=sys.stderr)
    _report(run.findings, program, args.format)
    for err in run.errors:
        print(f"taintflow: {err}", file=sys.stderr)
    if run.errors:
        return EXIT_ERROR
    return EXIT_FINDINGS if run.findings else EXIT_CLEAN


def cmd_oracle(args) -> int:
    from taintflow.oracle import oracle_analyze

    program, spec = _load(args)
    found = oracle_analyze(program, spec, KConfig(args.k), args.external_model, budget=args.budget)
    findings = [Finding(s, a, src, tuple(sorted(labels))) for s, a, src, labels in sorted(found, key=lambda t: t[:3])]
    _report(findings, program, args.format)
    return EXIT_FINDINGS if findings else EXIT_CLEAN


def cmd_gen(args) -> int:
    from taintflow.oracle import CORPUS_SPEC, Limits, generate_program

    limits = Limits(methods=args.methods, blocks=args.blocks, fields=args.fields, loops=not args.no_loops)
    seeds = range(args.seed, args.seed + args.count)
    if args.out is None:
        for seed in seeds:
            if args.count > 1:
                print(f"// seed {seed}")
            sys.stdout.write(generate_program(seed, limits))
        return EXIT_CLEAN
    args.out.mkdir(parents=True, exist_ok=True)
    for seed in seeds:
        (args.out / f"seed_{seed:04d}.ir").write_text(generate_program(seed, limits), encoding="utf-8")
    (args.out / "spec.json").write_text(CORPUS_SPEC.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(f"wrote {args.count} programs to {args.out}", file=sys.stderr)
    return EXIT_CLEAN


def cmd_check(args) -> int:
    program = load_program(*args.inputs)
    if args.print_ssa:
        sys.stdout.write(format_program(program))
    n_stmts = len(program.stmt_index)
    print(f"ok: {len(program.methods)} methods, {n_stmts} statements", file=sys.stderr)
    return EXIT_CLEAN


COMMANDS = {"analyze": cmd_analyze, "oracle": cmd_oracle, "gen": cmd_gen, "check": cmd_check}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (TaintflowError, BudgetExceeded, ValueError) as exc:
        print(f"taintflow: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"taintflow: {exc.filename}: {exc.strerror}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
