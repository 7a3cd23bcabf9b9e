"""Exhaustive forward taint tabulation used as a reference for the backward engine.

The transfer functions here are the forward duals of the backward ones,
written independently: for a statement ``s`` and a fact ``d`` holding before
``s`` they return every fact ``a`` holding after ``s`` such that the backward
rule for ``s`` maps ``a`` to ``d``.

Sources taint a whole value, so facts may stand for *all* extensions of a
prefix. An :class:`OFact` with ``limit=None`` is a single access path; with an
integer limit it denotes ``{base.fields.r : len(fields + r) <= limit}``.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from taintflow.access_path import RET, KConfig
from taintflow.callgraph import CallGraph, build_callgraph
from taintflow.errors import BudgetExceeded
from taintflow.ir import (
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    Goto,
    If,
    Load,
    Method,
    Phi,
    Program,
    Return,
    Stmt,
    Store,
    VCall,
)


class OFact(NamedTuple):
    base: str
    fields: tuple[str, ...] = ()
    limit: int | None = None

    def __str__(self):
        text = ".".join((self.base, *self.fields))
        return text if self.limit is None else f"{text}.*<={self.limit}"


NULL = OFact("#0")


def star(base: str, fields: tuple[str, ...], limit: int) -> OFact:
    return OFact(base, fields, None if limit == len(fields) else limit)


def rebase(d: OFact, base: str) -> OFact:
    return OFact(base, d.fields, d.limit)


def covers_bare(d: OFact, var: str) -> bool:
    """Does ``d`` include the bare variable ``var``?"""
    return d.base == var and not d.fields


def contains(d: OFact, base: str, fields: tuple[str, ...]) -> bool:
    if d.base != base:
        return False
    if d.limit is None:
        return d.fields == fields
    n = len(d.fields)
    return fields[:n] == d.fields and len(fields) <= d.limit


@dataclass(frozen=True)
class Env:
    """Per-(label, source) configuration for one forward run."""

    k: int
    universe: tuple[str, ...]
    arrays: frozenset[str]
    sources: frozenset[int]
    sanitizers: frozenset[int]
    active_source: int
    model: str = "taint-through"


def oracle_reify(base: str, field: str, defs) -> tuple[str, tuple[str, ...]]:
    path = [field]
    visited = set()
    while base not in visited and isinstance(defs.get(base), Load):
        visited.add(base)
        load = defs[base]
        path.insert(0, load.field)
        base = load.base
    return base, tuple(path)


def _without_region(d: OFact, g: tuple[str, ...], env: Env) -> set[OFact]:
    """``d`` minus every path starting with ``d.base.g``."""
    m = len(g)
    p = d.fields
    if d.limit is None:
        return set() if p[:m] == g and len(p) >= m else {d}
    if len(p) >= m:
        return set() if p[:m] == g else {d}
    if g[: len(p)] != p:
        return {d}
    out = set()
    for i in range(len(p), m):
        if i <= d.limit:
            out.add(OFact(d.base, g[:i]))
        if i + 1 <= d.limit:
            for h in env.universe:
                if h != g[i]:
                    out.add(star(d.base, g[:i] + (h,), d.limit))
    return out


def forward_stmt(s: Stmt, d: OFact, env: Env, defs) -> set[OFact]:
    """Facts after an intra-procedural statement (or a modeled call)."""
    if d == NULL:
        out = {NULL}
        if isinstance(s, (Call, VCall)) and s.id == env.active_source and s.target is not None:
            out.add(star(s.target, (), env.k))
        return out
    defined = s.defined()
    if defined is not None and d.base == defined:
        return set()

    if isinstance(s, (Alloc, Const, Goto, If)):
        return {d}
    if isinstance(s, Assign):
        out = {d}
        if d.base == s.source:
            out.add(rebase(d, s.target))
        return out
    if isinstance(s, BinOp):
        out = {d}
        if covers_bare(d, s.left) or covers_bare(d, s.right):
            out.add(OFact(s.target))
        return out
    if isinstance(s, Load):
        z, g = oracle_reify(s.base, s.field, defs)
        m = len(g)
        out = {d}
        if d.base == z:
            p = d.fields
            if d.limit is None:
                if len(p) >= m and p[:m] == g:
                    out.add(OFact(s.target, p[m:]))
            elif len(p) <= m:
                if g[: len(p)] == p and d.limit >= m:
                    out.add(star(s.target, (), d.limit - m))
            elif p[:m] == g:
                out.add(star(s.target, p[m:], d.limit - m))
        return out
    if isinstance(s, Store):
        z, g = oracle_reify(s.base, s.field, defs)
        m = len(g)
        if d.base == z and not any(f in env.arrays for f in g):
            out = _without_region(d, g, env)
        else:
            out = {d}
        if d.base == s.value and m + len(d.fields) <= env.k:
            if d.limit is None:
                out.add(OFact(z, g + d.fields))
            else:
                out.add(star(z, g + d.fields, min(d.limit + m, env.k)))
        return out
    if isinstance(s, (Call, VCall)):
        # sources, sanitizers and externals; resolved calls are handled by the tabulation
        if s.id in env.sources or s.id in env.sanitizers:
            return {d}
        out = {d}
        if env.model == "taint-through" and s.target is not None and d.base in s.actuals:
            out.add(rebase(d, s.target))
        return out
    raise TypeError(f"no forward transfer for {type(s).__name__}")


def across_phis(phis: Iterable[Phi], d: OFact, pred: str) -> set[OFact]:
    if d == NULL:
        return {NULL}
    phis = list(phis)
    out = set()
    if all(phi.target != d.base for phi in phis):
        out.add(d)
    for phi in phis:
        if phi.operand(pred) == d.base:
            out.add(rebase(d, phi.target))
    return out


def exit_facts(method: Method, r: Return, d: OFact, env: Env) -> set[OFact]:
    """Callee-side exit facts visible to callers after ``r``."""
    if d == NULL:
        return {NULL}
    out = set()
    if r.value is not None and d.base == r.value:
        out.add(rebase(d, RET))
    if d.base in method.params:
        if d.fields:
            out.add(d)
        elif d.limit is not None and d.limit >= 1:
            for h in env.universe:
                out.add(star(d.base, (h,), d.limit))
    return out


def entry_facts(call: Call | VCall, d: OFact, callee: Method) -> set[OFact]:
    if d == NULL:
        return {NULL}
    return {rebase(d, callee.params[i]) for i, a in enumerate(call.actuals) if a == d.base}


def to_caller(call: Call | VCall, ex: OFact, callee: Method) -> set[OFact]:
    if ex == NULL:
        return set()
    if ex.base == RET:
        return {rebase(ex, call.target)} if call.target is not None else set()
    i = callee.params.index(ex.base)
    return {rebase(ex, call.actuals[i])}


def call_to_return(call: Call | VCall, d: OFact) -> set[OFact]:
    """Facts that bypass a resolved callee."""
    if d == NULL:
        return {NULL}
    if call.target is not None and d.base == call.target:
        return set()
    if d.base in call.actuals:
        return {OFact(d.base)} if covers_bare(d, d.base) else set()
    return {d}


class _Successors:
    def __init__(self, method: Method):
        self.method = method
        self.next: dict[int, list[tuple[Stmt, tuple[Phi, ...], str] | tuple[Stmt, None, None]]] = {}
        for b in method.blocks:
            body = b.body
            for i, s in enumerate(body[:-1]):
                self.next[s.id] = [(body[i + 1], None, None)]
            term = body[-1]
            self.next[term.id] = [
                (method.block_map[lab].body[0], method.block_map[lab].phis, b.label)
                for lab in method.succ_blocks[b.label]
            ]


class ForwardTabulation:
    """Context-sensitive forward IFDS over :class:`OFact` with summaries.

    Every method entry is seeded with the null fact, so taint created anywhere
    reaches every caller context.
    """

    def __init__(self, program: Program, callgraph: CallGraph, env: Env, budget: int = 10_000_000):
        self.program = program
        self.callgraph = callgraph
        self.env = env
        self.budget = budget
        self.succ = {m.name: _Successors(m) for m in program.methods.values()}
        self.seen: set[tuple] = set()
        self.work: deque = deque()
        self.exits: dict[tuple, set[OFact]] = defaultdict(set)
        self.callers: dict[tuple, set[tuple]] = defaultdict(set)
        self.holds: dict[int, set[OFact]] = defaultdict(set)  # stmt id -> facts before it

    def _add(self, ctx, stmt: Stmt, d: OFact) -> None:
        key = (ctx, stmt.id, d)
        if key in self.seen:
            return
        self.seen.add(key)
        self.holds[stmt.id].add(d)
        self.work.append((ctx, stmt, d))

    def _after(self, ctx, method: Method, s: Stmt, facts: Iterable[OFact]) -> None:
        for nxt, phis, pred in self.succ[method.name].next[s.id]:
            for d in facts:
                if phis:
                    for moved in across_phis(phis, d, pred):
                        self._add(ctx, nxt, moved)
                else:
                    self._add(ctx, nxt, d)

    def run(self, seeds: Iterable[tuple[Method, OFact]] | None = None) -> "ForwardTabulation":
        """Tabulate to a fixpoint; by default the null fact enters every method."""
        if seeds is None:
            seeds = [(m, NULL) for m in self.program.methods.values()]
        for m, d in seeds:
            self._add((m.name, d), m.entry_stmt, d)
        return self._drain()

    def recheck(self) -> int:
        """Re-apply every transfer once more; returns the number of new path edges (0 at a fixpoint)."""
        before = len(self.seen)
        self.work.extend((ctx, self.program.stmt(sid), d) for ctx, sid, d in sorted(self.seen, key=repr))
        self._drain()
        return len(self.seen) - before

    def _drain(self) -> "ForwardTabulation":
        pops = 0
        while self.work:
            pops += 1
            if pops > self.budget:
                raise BudgetExceeded(self.budget)
            ctx, s, d = self.work.popleft()
            method = self.program.methods[ctx[0]]
            if isinstance(s, Return):
                for ex in exit_facts(method, s, d, self.env):
                    if ex in self.exits[ctx]:
                        continue
                    self.exits[ctx].add(ex)
                    for caller_ctx, call_id in list(self.callers[ctx]):
                        caller = self.program.method_of(call_id)
                        call = self.program.stmt(call_id)
                        self._after(caller_ctx, caller, call, to_caller(call, ex, method))
                continue
            callees = self.callgraph.callees(s.id) if isinstance(s, (Call, VCall)) else ()
            if callees and s.id not in self.env.sources and s.id not in self.env.sanitizers:
                self._after(ctx, method, s, call_to_return(s, d))
                if call_target_killed(s, d):
                    continue
                for callee in callees:
                    for e in entry_facts(s, d, callee):
                        cctx = (callee.name, e)
                        self.callers[cctx].add((ctx, s.id))
                        self._add(cctx, callee.entry_stmt, e)
                        for ex in list(self.exits[cctx]):
                            self._after(ctx, method, s, to_caller(s, ex, callee))
                continue
            self._after(ctx, method, s, forward_stmt(s, d, self.env, method.defs))
        return self


def call_target_killed(call: Call | VCall, d: OFact) -> bool:
    return d != NULL and call.target is not None and d.base == call.target


def forward_exits(program: Program, callgraph: CallGraph, env: Env, method: Method, entry: OFact) -> set[OFact]:
    """Exit facts of ``method`` reachable from one entry fact (or from the null fact)."""
    tab = ForwardTabulation(program, callgraph, env).run([(method, entry)])
    return set(tab.exits[(method.name, entry)])


def make_env(program: Program, roles, active_source: int, config: KConfig, model: str) -> Env:
    return Env(
        k=config.k,
        universe=tuple(sorted(program.field_names)),
        arrays=program.array_fields,
        sources=roles.sources,
        sanitizers=roles.sanitizers,
        active_source=active_source,
        model=model,
    )


def oracle_analyze(
    program: Program,
    spec,
    config: KConfig | None = None,
    external_model: str = "taint-through",
    callgraph: CallGraph | None = None,
    budget: int = 10_000_000,
) -> set[tuple[int, int, int, frozenset[str]]]:
    """All ``(sink stmt, sink arg, source stmt, labels)`` tuples found by forward tabulation."""
    from taintflow.client import make_queries, roles_for

    config = config or KConfig()
    callgraph = callgraph or build_callgraph(program)
    queries = make_queries(program, callgraph, spec)
    found: dict[tuple[int, int, int], set[str]] = defaultdict(set)
    for label in spec.labels:
        label_queries = [q for q in queries if q.label == label]
        if not label_queries:
            continue
        roles = roles_for(program, callgraph, spec, label)
        for source in sorted(roles.sources):
            env = make_env(program, roles, source, config, external_model)
            tab = ForwardTabulation(program, callgraph, env, budget).run()
            for q in label_queries:
                if any(covers_bare(d, q.var) for d in tab.holds.get(q.sink_stmt, ())):
                    found[(q.sink_stmt, q.sink_arg, source)].add(label)
    return {(s, a, src, frozenset(labels)) for (s, a, src), labels in found.items()}
