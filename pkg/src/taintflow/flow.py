"""Backward intra-procedural flow functions.

Each function maps a fact holding *after* a statement to the facts that must
hold *before* it. The five core rules (numbered 1-5 in ``FlowResult.case``)
are allocation, assignment, source, load and store; const, binop, phi,
sanitizer and external calls extend them to the rest of the IR.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

from taintflow.access_path import NO_MATCH, TOO_LONG, ZERO, AccessPath, Interner, strip_prefix
from taintflow.errors import UnknownPredecessor, UnreachableCase
from taintflow.ir import (
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    Goto,
    If,
    Load,
    Phi,
    Stmt,
    Store,
    VCall,
)

CORE_CASES = frozenset({1, 2, 3, 4, 5})


class FlowResult(NamedTuple):
    facts: tuple
    case: int | str


@dataclass
class FlowStats:
    """Fan-out instrumentation for the h-sparseness check."""

    calls: Counter = field(default_factory=Counter)
    max_fanout: Counter = field(default_factory=Counter)

    def record(self, case, n: int) -> None:
        self.calls[case] += 1
        if n > self.max_fanout[case]:
            self.max_fanout[case] = n

    def max_core_fanout(self) -> int:
        return max((self.max_fanout[c] for c in CORE_CASES), default=0)

    def merge(self, other: "FlowStats") -> None:
        self.calls.update(other.calls)
        for c, n in other.max_fanout.items():
            if n > self.max_fanout[c]:
                self.max_fanout[c] = n


@dataclass
class FlowContext:
    interner: Interner
    array_fields: frozenset[str] = frozenset()
    sources: frozenset[int] = frozenset()  # call-site ids acting as taint sources
    stats: FlowStats | None = None
    tracer: Callable[[int, object, object, tuple], None] | None = None

    def emit(self, stmt: Stmt, incoming, result: FlowResult) -> FlowResult:
        if self.stats is not None:
            self.stats.record(result.case, len(result.facts))
        if self.tracer is not None:
            self.tracer(stmt.id, incoming, result.case, result.facts)
        return result


def reify_path(base: str, fields: Sequence[str], defs: Mapping[str, Stmt]) -> tuple[str, tuple[str, ...]]:
    fields = tuple(fields)
    seen = set()
    while base not in seen:
        d = defs.get(base)
        if not isinstance(d, Load):
            break
        seen.add(base)
        fields = (d.field, *fields)
        base = d.base
    return base, fields


def reify(var: str, field_name: str, defs: Mapping[str, Stmt]) -> tuple[str, tuple[str, ...]]:
    """Full access path touched by ``var.field``, following load-defined bases."""
    return reify_path(var, (field_name,), defs)


def flow(stmt: Stmt, incoming: AccessPath, ctx: FlowContext, defs: Mapping[str, Stmt]) -> FlowResult:
    if incoming is ZERO:
        raise ValueError("the null fact is terminal and has no backward flow")
    b = incoming.base
    same = (incoming,)
    it = ctx.interner

    if isinstance(stmt, Alloc):
        res = FlowResult(() if stmt.target == b else same, 1)
    elif isinstance(stmt, Assign):
        res = FlowResult((it.with_base(incoming, stmt.source),) if stmt.target == b else same, 2)
    elif isinstance(stmt, (Call, VCall)) and stmt.id in ctx.sources:
        res = FlowResult((ZERO,) if stmt.target == b else same, 3)
    elif isinstance(stmt, Load):
        if stmt.target == b:
            z, g = reify(stmt.base, stmt.field, defs)
            ap = it.prepend_fields(incoming, g, base=z)
            res = FlowResult(() if ap is TOO_LONG else (ap,), 4)
        else:
            res = FlowResult(same, 4)
    elif isinstance(stmt, Store):
        z, g = reify(stmt.base, stmt.field, defs)
        rest = strip_prefix(incoming, g) if z == b else NO_MATCH
        if rest is NO_MATCH:
            res = FlowResult(same, 5)
        else:
            moved = it.make(stmt.value, rest)
            if any(f in ctx.array_fields for f in g):
                res = FlowResult((moved,) if moved is incoming else (moved, incoming), 5)
            else:
                res = FlowResult((moved,), 5)
    elif isinstance(stmt, Const):
        res = FlowResult(() if stmt.target == b else same, "const")
    elif isinstance(stmt, BinOp):
        if stmt.target != b:
            res = FlowResult(same, "binop")
        elif incoming.fields:
            res = FlowResult((), "binop")
        else:
            ops = dict.fromkeys((it.make(stmt.left), it.make(stmt.right)))
            res = FlowResult(tuple(ops), "binop")
    elif isinstance(stmt, (Goto, If)):
        res = FlowResult(same, "identity")
    else:
        raise UnreachableCase(f"statement {stmt.id} ({type(stmt).__name__}) has no intra-procedural flow")
    return ctx.emit(stmt, incoming, res)


def flow_phi(phi: Phi, incoming: AccessPath, pred_block: str, interner: Interner) -> FlowResult:
    operand = phi.operand(pred_block)
    if operand is None:
        raise UnknownPredecessor(f"{pred_block!r} is not an incoming label of phi {phi.target}")
    if incoming is not ZERO and incoming.base == phi.target:
        return FlowResult((interner.with_base(incoming, operand),), "phi")
    return FlowResult((incoming,), "phi")


def flow_phis(phis: Sequence[Phi], incoming: AccessPath, pred_block: str, ctx: FlowContext) -> FlowResult:
    """Apply a block's phi group for one incoming edge (parallel semantics)."""
    for phi in phis:
        if phi.target == incoming.base:
            return ctx.emit(phi, incoming, flow_phi(phi, incoming, pred_block, ctx.interner))
    return FlowResult((incoming,), "phi")


def handle_external(stmt: Call | VCall, incoming: AccessPath, interner: Interner, model: str = "taint-through") -> tuple:
    """Flow across a call with no analyzable body."""
    if stmt.target is None or incoming.base != stmt.target:
        return (incoming,)
    if model == "opaque":
        return ()
    return tuple(dict.fromkeys(interner.with_base(incoming, a) for a in stmt.actuals))


def flow_sanitizer(
    stmt: Call | VCall,
    incoming: AccessPath,
    label: str,
    labels,
    ctx: FlowContext,
    model: str = "taint-through",
) -> FlowResult:
    """Kill taint on the sanitized result when the sanitizer covers ``label``.

    A sanitizer for other labels behaves like any unknown external call.
    """
    if label in labels:
        res = FlowResult(() if stmt.target == incoming.base else (incoming,), "sanitizer")
    else:
        res = FlowResult(handle_external(stmt, incoming, ctx.interner, model), "external")
    return ctx.emit(stmt, incoming, res)
