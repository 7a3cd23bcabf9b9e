"""Call-site resolution: direct calls by name, virtual calls by CHA."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from taintflow.ir import Alloc, Assign, Call, Method, Phi, Program, VCall


@dataclass(frozen=True)
class CallGraph:
    edges: Mapping[int, tuple[Method, ...]] = field(default_factory=dict)
    externals: frozenset[int] = frozenset()

    def callees(self, stmt_id: int) -> tuple[Method, ...]:
        return self.edges.get(stmt_id, ())

    def callers(self, method: Method) -> list[int]:
        """Call-site ids whose callee set contains ``method``, ascending."""
        return self._callers.get(method.name, [])

    @property
    def _callers(self) -> dict[str, list[int]]:
        cache = self.__dict__.get("_callers_cache")
        if cache is None:
            cache = {}
            for site in sorted(self.edges):
                for m in self.edges[site]:
                    cache.setdefault(m.name, []).append(site)
            object.__setattr__(self, "_callers_cache", cache)
        return cache

    def dump(self) -> list[str]:
        return [f"{site} -> {m.name}" for site in sorted(self.edges) for m in self.edges[site]]


def allocation_types(method: Method, var: str) -> set[str] | None:
    """Types a variable may be allocated as, following copies and phis.

    Returns None when some definition on the chain is not an allocation.
    """
    types: set[str] = set()
    seen: set[str] = set()
    work = [var]
    defs = method.defs
    while work:
        v = work.pop()
        if v in seen:
            continue
        seen.add(v)
        d = defs.get(v)
        if isinstance(d, Alloc):
            types.add(d.type_name)
        elif isinstance(d, Assign):
            work.append(d.source)
        elif isinstance(d, Phi):
            work.extend(op for _, op in d.incoming)
        else:
            return None
    return types


def resolve_virtual(program: Program, method: Method, stmt: VCall) -> list[Method]:
    arity = len(stmt.args) + 1
    types = allocation_types(method, stmt.receiver)
    found: dict[str, Method] = {}
    if types:
        for t in types:
            target = program.lookup(t, stmt.method)
            if target is not None:
                found[target.name] = target
    else:
        for m in program.methods.values():
            if m.is_instance and m.simple_name == stmt.method:
                found[m.name] = m
    return [found[n] for n in sorted(found) if len(found[n].params) == arity]


def build_callgraph(program: Program) -> CallGraph:
    edges: dict[int, tuple[Method, ...]] = {}
    externals: set[int] = set()
    for method in program.methods.values():
        for s in method.statements():
            if isinstance(s, Call):
                target = program.methods.get(s.callee)
                if target is not None and len(target.params) == len(s.args):
                    edges[s.id] = (target,)
                else:
                    externals.add(s.id)
            elif isinstance(s, VCall):
                targets = resolve_virtual(program, method, s)
                if targets:
                    edges[s.id] = tuple(targets)
                else:
                    externals.add(s.id)
    return CallGraph(edges, frozenset(externals))
