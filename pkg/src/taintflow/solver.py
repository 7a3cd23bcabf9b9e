"""Demand-driven backward IFDS tabulation over access-path facts.

A solver instance answers one query (a fact before a sink call) for one taint
label. Exploded-supergraph nodes are ``(stmt id, fact)`` pairs meaning "fact
holds immediately before stmt"; they are only created when a worklist item
demands them. Path edges are keyed by ``(origin, stmt id, fact)`` where the
origin is either the query itself or the callee summary being computed, and
each one records the first edge that produced it so bug traces can be
rebuilt afterwards.
"""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from taintflow.access_path import RET, ZERO, AccessPath, Interner, KConfig
from taintflow.callgraph import CallGraph
from taintflow.errors import BudgetExceeded, InvalidSummary
from taintflow.flow import FlowContext, FlowResult, FlowStats, flow, flow_phis, flow_sanitizer, handle_external
from taintflow.ir import Call, Method, Program, Stmt, VCall

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000_000
EXTERNAL_MODELS = ("taint-through", "opaque")


class Hit:
    """The null fact, tagged with the source statement that produced it."""

    __slots__ = ("source",)

    def __init__(self, source: int):
        self.source = source

    def __eq__(self, other):
        return isinstance(other, Hit) and other.source == self.source

    def __hash__(self):
        return hash(("hit", self.source))

    def __repr__(self):
        return "0"


class SummaryKey(NamedTuple):
    method: Method
    exit: AccessPath


class _Query:
    def __repr__(self):
        return "QUERY"


QUERY = _Query()


class PathEdge(NamedTuple):
    origin: object  # QUERY or SummaryKey
    stmt: int
    fact: object  # AccessPath or Hit


class Link(NamedTuple):
    prev: PathEdge | None
    kind: str  # query | seed | flow | summary | unbalanced
    skipped: tuple[int, ...] = ()
    callee: SummaryKey | None = None
    entry: object = None


@dataclass(frozen=True)
class Roles:
    """Call sites with a modeled meaning for the current taint label."""

    label: str = "taint"
    sources: frozenset[int] = frozenset()
    sanitizers: frozenset[int] = frozenset()
    sanitizer_labels: dict = field(default_factory=dict)  # site -> labels


@dataclass
class SolverConfig:
    k: int = 5
    skip_identity: bool = True
    external_model: str = "taint-through"
    budget: int = DEFAULT_BUDGET
    record_events: bool = False
    tracer: Callable | None = None

    def __post_init__(self):
        if self.external_model not in EXTERNAL_MODELS:
            raise ValueError(f"unknown external model {self.external_model!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


@dataclass
class ReachabilityResult:
    query: PathEdge
    sources: dict[int, PathEdge]  # source stmt -> first witness hit node
    summaries: dict[SummaryKey, dict]  # key -> {entry fact: witness path edge}
    links: dict[PathEdge, Link]
    edges_materialized: int
    pops: int
    visited_methods: set[str]
    events: list[int]
    stats: FlowStats

    @property
    def reachable(self) -> bool:
        return bool(self.sources)

    def summary_table(self) -> dict[tuple[str, str], frozenset[str]]:
        """``(method, canonical exit) -> canonical entry facts``; tagged zeros render as ``0``."""
        out = {}
        for key, entries in self.summaries.items():
            out[(key.method.name, canonical(key.exit, key.method))] = frozenset(
                canonical(f, key.method) for f in entries
            )
        return out


def canonical(fact, method: Method) -> str:
    """Render a callee-side fact with parameters as this/argN."""
    if isinstance(fact, Hit) or fact is ZERO:
        return "0"
    i = method.param_index(fact.base)
    base = method.canonical_param(i) if i is not None else fact.base
    return ".".join((base, *fact.fields))


def format_summary(method_name: str, exit_fact: str, entries) -> str:
    return f"{method_name}: {exit_fact} <- {{{', '.join(sorted(entries))}}}"


def map_to_callee(call: Call | VCall, caller_fact: AccessPath, callee: Method, interner: Interner) -> tuple:
    """Callee-side exit facts for a caller fact after ``call``; empty when unrelated."""
    if call.target is not None and caller_fact.base == call.target:
        return (interner.with_base(caller_fact, RET),)
    return tuple(
        interner.with_base(caller_fact, callee.params[i])
        for i, a in enumerate(call.actuals)
        if a == caller_fact.base
    )


def map_to_caller(call: Call | VCall, entry_fact, callee: Method, interner: Interner):
    if isinstance(entry_fact, Hit) or entry_fact is ZERO:
        return entry_fact
    i = callee.param_index(entry_fact.base)
    if i is None:
        raise InvalidSummary(f"summary fact {entry_fact} of {callee.name} is not rooted at a parameter")
    return interner.with_base(entry_fact, call.actuals[i])


class Solver:
    def __init__(
        self,
        program: Program,
        callgraph: CallGraph,
        roles: Roles | None = None,
        config: SolverConfig | None = None,
        interner: Interner | None = None,
    ):
        self.program = program
        self.callgraph = callgraph
        self.roles = roles or Roles()
        self.config = config or SolverConfig()
        self.interner = interner or Interner(KConfig(self.config.k))
        self.stats = FlowStats()
        self.ctx = FlowContext(
            self.interner,
            program.array_fields,
            self.roles.sources,
            self.stats,
            self.config.tracer,
        )
        self._preds_cache: dict[int, list] = {}

    # public

    def solve(self, stmt_id: int, fact: AccessPath) -> ReachabilityResult:
        self.links: dict[PathEdge, Link] = {}
        self.summaries: dict[SummaryKey, dict] = {}
        self.incoming: dict[SummaryKey, list] = defaultdict(list)
        self.sources: dict[int, PathEdge] = {}
        self.visited: set[str] = set()
        self.events: list[int] = []
        self.edges = 0
        self.pops = 0
        self.worklist: deque[PathEdge] = deque()

        query = PathEdge(QUERY, stmt_id, fact)
        self._propagate(query, Link(None, "query"))
        while self.worklist:
            self.pops += 1
            if self.pops > self.config.budget:
                raise BudgetExceeded(self.config.budget)
            self._process(self.worklist.popleft())
        return ReachabilityResult(
            query,
            self.sources,
            self.summaries,
            self.links,
            self.edges,
            self.pops,
            self.visited,
            self.events,
            self.stats,
        )

    # tabulation

    def _touch(self, stmt_id: int) -> None:
        if self.config.record_events:
            self.events.append(stmt_id)

    def _propagate(self, pe: PathEdge, link: Link) -> None:
        self.edges += 1
        if pe in self.links:
            return
        self.links[pe] = link
        self.visited.add(self.program.method_of(pe.stmt).name)
        self._touch(pe.stmt)
        if isinstance(pe.fact, Hit):
            if pe.origin is QUERY:
                self.sources.setdefault(pe.fact.source, pe)
            else:
                self._add_entry(pe.origin, pe.fact, pe)
            return
        self.worklist.append(pe)

    def _process(self, pe: PathEdge) -> None:
        method, stmt = self.program.stmt_index[pe.stmt]
        fact = pe.fact
        if stmt is method.entry_stmt:
            self._at_entry(pe, method, fact)
            return
        for p, edge in self._pred_positions(method, stmt):
            self._transfer(pe, method, p, edge, fact)

    def _pred_positions(self, method: Method, stmt: Stmt) -> list:
        """Statements that can execute just before ``stmt``, with the phi edge crossed."""
        cached = self._preds_cache.get(stmt.id)
        if cached is not None:
            return cached
        prev = method.previous(stmt)
        if prev is not None:
            out = [(prev, None)]
        else:
            block = method.block_of[stmt.id]
            phis = block.phis
            out = [
                (method.block_map[lab].terminator, (phis, lab) if phis else None)
                for lab in method.pred_blocks[block.label]
            ]
        self._preds_cache[stmt.id] = out
        return out

    def _transfer(self, pe: PathEdge, method: Method, p: Stmt, edge, fact) -> None:
        origin = pe.origin
        skipped: list[int] = []
        seen: set[int] = set()
        while True:
            phi_changed = False
            if edge is not None:
                phis, pred_label = edge
                moved = flow_phis(phis, fact, pred_label, self.ctx).facts[0]
                phi_changed = moved is not fact
                fact = moved
            self._touch(p.id)
            if isinstance(p, (Call, VCall)) and p.id not in self.roles.sources:
                self._call(pe, method, p, fact, tuple(skipped), phi_changed)
                return
            facts = flow(p, fact, self.ctx, method.defs).facts
            if (
                self.config.skip_identity
                and not phi_changed
                and len(facts) == 1
                and facts[0] is fact
                and p.id not in seen
            ):
                preds = self._pred_positions(method, p)
                if len(preds) == 1:
                    seen.add(p.id)
                    skipped.append(p.id)
                    p, edge = preds[0]
                    continue
            link = Link(pe, "flow", tuple(skipped))
            for f in facts:
                self._propagate(PathEdge(origin, p.id, Hit(p.id) if f is ZERO else f), link)
            return

    def _call(self, pe: PathEdge, method: Method, p: Call | VCall, fact, skipped, phi_changed) -> None:
        origin = pe.origin
        roles = self.roles
        if p.id in roles.sanitizers:
            facts = flow_sanitizer(
                p, fact, roles.label, roles.sanitizer_labels.get(p.id, (roles.label,)), self.ctx,
                self.config.external_model,
            ).facts
            link = Link(pe, "flow", skipped)
            for f in facts:
                self._propagate(PathEdge(origin, p.id, f), link)
            return
        callees = self.callgraph.callees(p.id)
        if not callees:
            facts = handle_external(p, fact, self.interner, self.config.external_model)
            self.ctx.emit(p, fact, FlowResult(facts, "external"))
            link = Link(pe, "flow", skipped)
            for f in facts:
                self._propagate(PathEdge(origin, p.id, f), link)
            return

        returned = p.target is not None and fact.base == p.target
        into_callee = returned or (fact.fields and fact.base in p.actuals)
        if not into_callee:
            self.ctx.emit(p, fact, FlowResult((fact,), "call-identity"))
            self._propagate(PathEdge(origin, p.id, fact), Link(pe, "flow", skipped))
            return
        for callee in callees:
            for exit_fact in map_to_callee(p, fact, callee, self.interner):
                self._apply(pe, p, callee, exit_fact, skipped)

    def _apply(self, pe: PathEdge, p: Call | VCall, callee: Method, exit_fact: AccessPath, skipped) -> None:
        key = SummaryKey(callee, exit_fact)
        self.incoming[key].append((pe, p, skipped))
        if key not in self.summaries:
            log.debug("compute summary(%s, %s)", callee.name, exit_fact)
            self.summaries[key] = {}
            for r in callee.returns:
                if exit_fact.base == RET:
                    if r.value is None:
                        continue
                    start = self.interner.with_base(exit_fact, r.value)
                else:
                    start = exit_fact
                self._propagate(PathEdge(key, r.id, start), Link(None, "seed"))
        else:
            log.debug("reuse summary(%s, %s)", callee.name, exit_fact)
        for entry in list(self.summaries[key]):
            self._apply_entry(pe, p, skipped, key, entry)

    def _apply_entry(self, pe: PathEdge, p: Call | VCall, skipped, key: SummaryKey, entry) -> None:
        caller_fact = map_to_caller(p, entry, key.method, self.interner)
        if self.config.tracer is not None:
            self.config.tracer(p.id, pe.fact, "summary", (caller_fact,))
        self._propagate(PathEdge(pe.origin, p.id, caller_fact), Link(pe, "summary", skipped, key, entry))

    def _add_entry(self, key: SummaryKey, entry, witness: PathEdge) -> None:
        entries = self.summaries[key]
        if entry in entries:
            return
        entries[entry] = witness
        for pe, p, skipped in list(self.incoming[key]):
            self._apply_entry(pe, p, skipped, key, entry)

    def _at_entry(self, pe: PathEdge, method: Method, fact: AccessPath) -> None:
        i = method.param_index(fact.base)
        if i is None:
            return  # locals cannot be live at entry in SSA form
        if pe.origin is not QUERY:
            self._add_entry(pe.origin, fact, pe)
            return
        for site in self.callgraph.callers(method):
            if site in self.roles.sources or site in self.roles.sanitizers:
                continue
            call = self.program.stmt(site)
            arg = call.actuals[i]
            self._touch(site)
            self._propagate(PathEdge(QUERY, site, self.interner.with_base(fact, arg)), Link(pe, "unbalanced"))


def solve(
    program: Program,
    callgraph: CallGraph,
    roles: Roles,
    query: tuple[int, AccessPath],
    config: SolverConfig | None = None,
    interner: Interner | None = None,
) -> ReachabilityResult:
    return Solver(program, callgraph, roles, config, interner).solve(*query)
