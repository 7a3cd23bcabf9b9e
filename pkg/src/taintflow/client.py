"""Taint specification, query generation and finding assembly."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Iterable, Iterator

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from taintflow.access_path import Interner, KConfig
from taintflow.callgraph import CallGraph, build_callgraph
from taintflow.errors import BudgetExceeded, SpecError, TraceCorrupt
from taintflow.flow import FlowStats
from taintflow.ir import Call, Method, Program, VCall
from taintflow.solver import (
    DEFAULT_BUDGET,
    Hit,
    PathEdge,
    ReachabilityResult,
    Roles,
    Solver,
    SolverConfig,
    format_summary,
)

log = logging.getLogger(__name__)

Label = Annotated[str, Field(min_length=1)]


class _Entry(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    method: Annotated[str, Field(min_length=1)]
    labels: Annotated[tuple[Label, ...], Field(min_length=1)]


class SourceSpec(_Entry):
    pass


class SanitizerSpec(_Entry):
    pass


class SinkSpec(_Entry):
    arg: Annotated[int, Field(ge=0)] = 0


class TaintSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    sources: tuple[SourceSpec, ...] = ()
    sinks: tuple[SinkSpec, ...] = ()
    sanitizers: tuple[SanitizerSpec, ...] = ()

    @property
    def labels(self) -> list[str]:
        out = set()
        for entry in (*self.sources, *self.sinks, *self.sanitizers):
            out.update(entry.labels)
        return sorted(out)


DEFAULT_SPEC = TaintSpec(
    sources=[SourceSpec(method="getTainted", labels=["XSS"])],
    sinks=[SinkSpec(method="sink", arg=0, labels=["XSS"])],
    sanitizers=[SanitizerSpec(method="clean", labels=["XSS"])],
)


def parse_spec(text: str, origin: str = "<spec>") -> TaintSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{origin}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return TaintSpec.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise SpecError(f"{origin}: at {where}: {err['msg']}") from None


def load_spec(path: str | Path) -> TaintSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc.strerror}") from None
    return parse_spec(text, str(path))


# role matching


def call_sites(program: Program) -> Iterator[tuple[Method, Call | VCall]]:
    for m in program.methods.values():
        for s in m.statements():
            if isinstance(s, (Call, VCall)):
                yield m, s


def call_names(stmt: Call | VCall, callgraph: CallGraph) -> set[str]:
    """Names a spec entry may use for this call site.

    Resolved callees match by qualified name; calls without a body also
    match by their bare method name.
    """
    callees = callgraph.callees(stmt.id)
    names = {m.name for m in callees}
    if isinstance(stmt, Call):
        names.add(stmt.callee)
    if not callees:
        names.add(stmt.name)
    return names


def roles_for(program: Program, callgraph: CallGraph, spec: TaintSpec, label: str) -> Roles:
    sources, sanitizers, san_labels = set(), set(), {}
    for _, stmt in call_sites(program):
        names = call_names(stmt, callgraph)
        if any(e.method in names and label in e.labels for e in spec.sources):
            sources.add(stmt.id)
            continue
        labels = set()
        for e in spec.sanitizers:
            if e.method in names:
                labels.update(e.labels)
        if label in labels:
            sanitizers.add(stmt.id)
            san_labels[stmt.id] = frozenset(labels)
    return Roles(label, frozenset(sources), frozenset(sanitizers), san_labels)


@dataclass(frozen=True)
class Query:
    sink_stmt: int
    sink_arg: int
    var: str
    label: str


def make_queries(program: Program, callgraph: CallGraph, spec: TaintSpec) -> list[Query]:
    out: dict[tuple, Query] = {}
    for _, stmt in call_sites(program):
        names = call_names(stmt, callgraph)
        for entry in spec.sinks:
            if entry.method not in names:
                continue
            if entry.arg >= len(stmt.args):
                log.warning("sink %s at stmt %d has no argument %d", entry.method, stmt.id, entry.arg)
                continue
            for label in sorted(entry.labels):
                key = (stmt.id, entry.arg, label)
                out.setdefault(key, Query(stmt.id, entry.arg, stmt.args[entry.arg], label))
    return [out[k] for k in sorted(out)]


# findings


@dataclass
class Finding:
    sink_stmt: int
    sink_arg: int
    source_stmt: int
    labels: tuple[str, ...]
    trace: list[tuple[int, str]] = field(default_factory=list)

    @property
    def key(self) -> tuple[int, int, int, tuple[str, ...]]:
        return (self.sink_stmt, self.sink_arg, self.source_stmt, self.labels)

    def to_json(self) -> dict:
        return {
            "sink_stmt": self.sink_stmt,
            "sink_arg": self.sink_arg,
            "source_stmt": self.source_stmt,
            "labels": list(self.labels),
            "trace": [{"stmt": s, "fact": f} for s, f in self.trace],
        }


def build_trace(result: ReachabilityResult, source_stmt: int) -> list[tuple[int, str]]:
    """Statement-level sink-to-source trace from first-witness path-edge links."""
    if source_stmt not in result.sources:
        raise TraceCorrupt(f"source {source_stmt} was not reached by this query")
    return _segment(result, result.sources[source_stmt], 0)


def _chain(result: ReachabilityResult, pe: PathEdge) -> list[PathEdge]:
    chain = [pe]
    seen = {pe}
    while True:
        link = result.links.get(chain[-1])
        if link is None:
            raise TraceCorrupt(f"dangling predecessor link at {chain[-1]}")
        if link.prev is None:
            break
        if link.prev in seen:
            raise TraceCorrupt(f"cyclic predecessor chain at {link.prev}")
        seen.add(link.prev)
        chain.append(link.prev)
    chain.reverse()
    return chain


def _segment(result: ReachabilityResult, pe: PathEdge, depth: int) -> list[tuple[int, str]]:
    if depth > 10_000:
        raise TraceCorrupt("summary expansion does not terminate")
    chain = _chain(result, pe)
    out: list[tuple[int, str]] = []
    for i, node in enumerate(chain):
        link = result.links[node]
        if i:
            prev_fact = str(chain[i - 1].fact)
            out.extend((sid, prev_fact) for sid in link.skipped)
            if link.kind == "summary":
                witness = result.summaries.get(link.callee, {}).get(link.entry)
                if witness is None:
                    raise TraceCorrupt(f"summary {link.callee} lacks a witness for {link.entry}")
                out.extend(_segment(result, witness, depth + 1))
                if isinstance(node.fact, Hit):
                    continue  # the callee segment already ends at the source
        out.append((node.stmt, str(node.fact)))
    return out


@dataclass
class AnalysisConfig:
    k: int = 5
    skip_identity: bool = True
    external_model: str = "taint-through"
    budget: int = DEFAULT_BUDGET
    jobs: int = 1
    tracer: object = None
    record_events: bool = False

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            k=self.k,
            skip_identity=self.skip_identity,
            external_model=self.external_model,
            budget=self.budget,
            record_events=self.record_events,
            tracer=self.tracer,
        )


@dataclass
class AnalysisRun:
    findings: list[Finding]
    results: list[tuple[Query, ReachabilityResult | None]]
    errors: list[str]
    labels: list[str]
    stats: FlowStats

    @property
    def edges_materialized(self) -> int:
        return sum(r.edges_materialized for _, r in self.results if r is not None)

    @property
    def visited_methods(self) -> set[str]:
        out = set()
        for _, r in self.results:
            if r is not None:
                out |= r.visited_methods
        return out

    def summary_lines(self) -> list[str]:
        tagged = len(self.labels) > 1
        table: dict[tuple[str, str, str], set[str]] = {}
        for q, r in self.results:
            if r is None:
                continue
            for (method, exit_fact), entries in r.summary_table().items():
                table.setdefault((method, exit_fact, q.label), set()).update(entries)
        lines = set()
        for (method, exit_fact, label), entries in table.items():
            line = format_summary(method, exit_fact, entries)
            lines.add(f"{line} @{label}" if tagged else line)
        return sorted(lines)


def run_analysis(
    program: Program,
    spec: TaintSpec,
    config: AnalysisConfig | None = None,
    callgraph: CallGraph | None = None,
) -> AnalysisRun:
    config = config or AnalysisConfig()
    callgraph = callgraph or build_callgraph(program)
    interner = Interner(KConfig(config.k))
    solver_config = config.solver_config()
    roles = {label: roles_for(program, callgraph, spec, label) for label in spec.labels}
    queries = make_queries(program, callgraph, spec)

    def run(q: Query):
        solver = Solver(program, callgraph, roles[q.label], solver_config, interner)
        try:
            return solver.solve(q.sink_stmt, interner.make(q.var)), None
        except BudgetExceeded as exc:
            return None, f"query at stmt {q.sink_stmt} arg {q.sink_arg} [{q.label}]: {exc}"

    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as pool:
            outcomes = list(pool.map(run, queries))
    else:
        outcomes = [run(q) for q in queries]

    stats = FlowStats()
    errors = []
    results = []
    merged: dict[tuple[int, int, int], tuple[set[str], list]] = {}
    for q, (result, error) in zip(queries, outcomes):
        results.append((q, result))
        if error:
            errors.append(error)
            continue
        stats.merge(result.stats)
        for source in sorted(result.sources):
            labels, trace = merged.setdefault((q.sink_stmt, q.sink_arg, source), (set(), []))
            labels.add(q.label)
            if not trace:
                trace.extend(build_trace(result, source))
    findings = [
        Finding(sink, arg, source, tuple(sorted(labels)), trace)
        for (sink, arg, source), (labels, trace) in sorted(merged.items())
    ]
    return AnalysisRun(findings, results, errors, spec.labels, stats)


def analyze(program: Program, spec: TaintSpec, config: AnalysisConfig | None = None) -> list[Finding]:
    return run_analysis(program, spec, config).findings


def render_json(findings: Iterable[Finding]) -> str:
    return json.dumps([f.to_json() for f in findings], indent=2) + "\n"


def render_text(findings: Iterable[Finding], program: Program) -> str:
    paragraphs = []
    for f in findings:
        sink_line = program.stmt(f.sink_stmt).line
        src_line = program.stmt(f.source_stmt).line
        lines = [
            f"[{', '.join(f.labels)}] sink stmt {f.sink_stmt} (line {sink_line}) arg {f.sink_arg}"
            f" <- source stmt {f.source_stmt} (line {src_line})"
        ]
        for stmt_id, fact in f.trace:
            m = program.method_of(stmt_id)
            lines.append(f"    {stmt_id:>5}  {m.name:<20} line {program.stmt(stmt_id).line:<4} {fact}")
        paragraphs.append("\n".join(lines))
    return "\n\n".join(paragraphs) + ("\n" if paragraphs else "")
