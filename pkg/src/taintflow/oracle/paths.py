"""Brute-force path enumeration for small loop-free, non-recursive programs.

Every method is tried as the program entry. Each execution path is walked
with an explicit set of tainted access paths (all paths up to length k over
the program's field names), with callees inlined. Nothing here is shared with
the tabulating oracle beyond load reification, which defines the access-path
semantics itself.
"""

from __future__ import annotations

from collections import defaultdict
from itertools import product
from typing import Iterator

from taintflow.callgraph import CallGraph, build_callgraph
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
    Program,
    Return,
    Store,
    VCall,
)
from taintflow.oracle.forward import oracle_reify

Taint = frozenset  # of (var, fields)


class TooComplex(Exception):
    """The program is outside the brute-force oracle's scope."""


def _all_suffixes(universe: tuple[str, ...], k: int) -> list[tuple[str, ...]]:
    out = [()]
    layer = [()]
    for _ in range(k):
        layer = [p + (f,) for p in layer for f in universe]
        out.extend(layer)
    return out


def is_loop_free(method: Method) -> bool:
    state: dict[str, int] = {}

    def visit(label: str) -> bool:
        state[label] = 1
        for nxt in method.succ_blocks[label]:
            if state.get(nxt) == 1 or (nxt not in state and not visit(nxt)):
                return False
        state[label] = 2
        return True

    return visit(method.blocks[0].label)


def _calls_acyclic(program: Program, cg: CallGraph) -> bool:
    graph = defaultdict(set)
    for site, callees in cg.edges.items():
        graph[program.method_of(site).name].update(m.name for m in callees)
    state: dict[str, int] = {}

    def visit(n: str) -> bool:
        state[n] = 1
        for m in graph[n]:
            if state.get(m) == 1 or (m not in state and not visit(m)):
                return False
        state[n] = 2
        return True

    return all(visit(n) for n in list(program.methods) if n not in state)


class PathEnumerator:
    def __init__(self, program: Program, cg: CallGraph, roles, source: int, k: int, model: str, max_paths: int):
        self.program = program
        self.cg = cg
        self.roles = roles
        self.source = source
        self.k = k
        self.model = model
        self.max_paths = max_paths
        self.universe = tuple(sorted(program.field_names))
        self.suffixes = _all_suffixes(self.universe, k)
        self.arrays = program.array_fields
        self.hits: set[int] = set()  # sink stmt ids with a tainted argument
        self.sink_vars: dict[int, set[str]] = defaultdict(set)
        self.steps = 0

    def _kill(self, taint: set, var: str) -> None:
        for t in [t for t in taint if t[0] == var]:
            taint.discard(t)

    def _copy(self, taint: set, dst: str, src: str) -> None:
        for t in [t for t in taint if t[0] == src]:
            taint.add((dst, t[1]))

    def run_method(self, method: Method, taint: frozenset) -> Iterator[tuple[frozenset, Return]]:
        """Yield the taint at every reachable return, once per path."""
        yield from self._walk(method, method.blocks[0].label, None, set(taint))

    def _walk(self, method: Method, label: str, pred: str | None, taint: set):
        self.steps += 1
        if self.steps > self.max_paths:
            raise TooComplex("path budget exhausted")
        block = method.block_map[label]
        if block.phis:
            values = {phi.target: {t for t in taint if t[0] == phi.operand(pred)} for phi in block.phis}
            for phi in block.phis:
                self._kill(taint, phi.target)
            for target, ts in values.items():
                taint.update((target, f) for _, f in ts)
        yield from self._body(method, block, 0, taint)

    def _body(self, method: Method, block, i: int, taint: set):
        body = block.body
        while i < len(body):
            s = body[i]
            for q_var in self.sink_vars.get(s.id, ()):
                if (q_var, ()) in taint:
                    self.hits.add(s.id)
            if isinstance(s, Return):
                yield frozenset(taint), s
                return
            if isinstance(s, Goto):
                yield from self._walk(method, s.label, block.label, taint)
                return
            if isinstance(s, If):
                for lab in (s.then_label, s.else_label):
                    yield from self._walk(method, lab, block.label, set(taint))
                return
            if isinstance(s, (Call, VCall)) and self.cg.callees(s.id) and not self._modeled(s):
                for callee in self.cg.callees(s.id):
                    for after in self._invoke(s, callee, taint):
                        yield from self._body(method, block, i + 1, after)
                return
            self._step(s, taint, method)
            i += 1

    def _modeled(self, s) -> bool:
        return s.id in self.roles.sources or s.id in self.roles.sanitizers

    def _invoke(self, call, callee: Method, taint: set):
        entry = set()
        for p, a in zip(callee.params, call.actuals):
            entry.update((p, f) for v, f in taint if v == a)
        for exit_taint, ret in self.run_method(callee, frozenset(entry)):
            after = set(taint)
            if call.target is not None:
                self._kill(after, call.target)
            for a in set(call.actuals):
                for t in [t for t in after if t[0] == a and t[1]]:
                    after.discard(t)
            for p, a in zip(callee.params, call.actuals):
                after.update((a, f) for v, f in exit_taint if v == p and f)
            if call.target is not None and ret.value is not None:
                after.update((call.target, f) for v, f in exit_taint if v == ret.value)
            yield after

    def _step(self, s, taint: set, method: Method) -> None:
        defs = method.defs
        if isinstance(s, (Alloc, Const)):
            self._kill(taint, s.target)
        elif isinstance(s, Assign):
            self._kill(taint, s.target)
            self._copy(taint, s.target, s.source)
        elif isinstance(s, BinOp):
            hot = (s.left, ()) in taint or (s.right, ()) in taint
            self._kill(taint, s.target)
            if hot:
                taint.add((s.target, ()))
        elif isinstance(s, Load):
            z, g = oracle_reify(s.base, s.field, defs)
            m = len(g)
            moved = {(s.target, f[m:]) for v, f in taint if v == z and f[:m] == g}
            self._kill(taint, s.target)
            taint.update(moved)
        elif isinstance(s, Store):
            z, g = oracle_reify(s.base, s.field, defs)
            m = len(g)
            moved = {(z, g + f) for v, f in taint if v == s.value and m + len(f) <= self.k}
            if not any(f in self.arrays for f in g):
                for t in [t for t in taint if t[0] == z and t[1][:m] == g]:
                    taint.discard(t)
            taint.update(moved)
        elif isinstance(s, (Call, VCall)):
            if s.target is None:
                return
            if s.id == self.source:
                self._kill(taint, s.target)
                taint.update((s.target, f) for f in self.suffixes)
            elif s.id in self.roles.sources or s.id in self.roles.sanitizers or self.model == "opaque":
                self._kill(taint, s.target)
            else:
                moved = {(s.target, f) for v, f in taint if v in s.actuals}
                self._kill(taint, s.target)
                taint.update(moved)
        else:
            raise TypeError(f"unexpected statement {s!r}")


def enumerate_paths(
    program: Program,
    spec,
    k: int = 5,
    external_model: str = "taint-through",
    max_methods: int = 3,
    max_paths: int = 200_000,
) -> set[tuple[int, int, int, frozenset[str]]]:
    """Finding set by exhaustive path walking; raises :class:`TooComplex` outside scope."""
    from taintflow.client import make_queries, roles_for

    if len(program.methods) > max_methods:
        raise TooComplex(f"{len(program.methods)} methods")
    cg = build_callgraph(program)
    if not all(is_loop_free(m) for m in program.methods.values()) or not _calls_acyclic(program, cg):
        raise TooComplex("loops or recursion")
    queries = make_queries(program, cg, spec)
    found: dict[tuple[int, int, int], set[str]] = defaultdict(set)
    for label in spec.labels:
        label_queries = [q for q in queries if q.label == label]
        if not label_queries:
            continue
        roles = roles_for(program, cg, spec, label)
        for source, q in product(sorted(roles.sources), label_queries):
            walker = PathEnumerator(program, cg, roles, source, k, external_model, max_paths)
            walker.sink_vars[q.sink_stmt].add(q.var)
            for m in program.methods.values():
                for _ in walker.run_method(m, frozenset()):
                    pass
            if q.sink_stmt in walker.hits:
                found[(q.sink_stmt, q.sink_arg, source)].add(label)
    return {(s, a, src, frozenset(ls)) for (s, a, src), ls in found.items()}
