"""SSA validation and construction (pruned SSA, dominance-frontier placement)."""

from __future__ import annotations

import dataclasses
from collections import defaultdict
from itertools import count

import networkx as nx

from taintflow.errors import SsaError
from taintflow.ir import (
    Assign,
    BinOp,
    Block,
    Call,
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


def _cfg(method: Method) -> nx.DiGraph:
    g = nx.DiGraph()
    for b in method.blocks:
        g.add_node(b.label)
        for s in method.succ_blocks[b.label]:
            g.add_edge(b.label, s)
    return g


def reachable_labels(method: Method) -> set[str]:
    return nx.descendants(_cfg(method), method.entry.label) | {method.entry.label}


def prune_unreachable(method: Method) -> Method:
    """Drop blocks unreachable from the entry, and phi operands flowing from them."""
    live = reachable_labels(method)
    if len(live) == len(method.blocks):
        return method
    blocks = []
    for b in method.blocks:
        if b.label not in live:
            continue
        stmts = []
        for s in b.stmts:
            if isinstance(s, Phi):
                s = dataclasses.replace(s, incoming=tuple((l, v) for l, v in s.incoming if l in live))
            stmts.append(s)
        blocks.append(Block(b.label, tuple(stmts)))
    return dataclasses.replace(method, blocks=tuple(blocks))


class _Dominance:
    def __init__(self, method: Method):
        g = _cfg(method)
        entry = method.entry.label
        self.idom = nx.immediate_dominators(g, entry)
        self.frontier = nx.dominance_frontiers(g, entry)
        self.children: dict[str, list[str]] = defaultdict(list)
        order = {b.label: i for i, b in enumerate(method.blocks)}
        for node, parent in sorted(self.idom.items(), key=lambda kv: order[kv[0]]):
            if node != parent:
                self.children[parent].append(node)

    def dominates(self, a: str, b: str) -> bool:
        while True:
            if a == b:
                return True
            parent = self.idom.get(b)
            if parent is None or parent == b:
                return False
            b = parent


def validate_ssa(method: Method) -> None:
    """Raise :class:`SsaError` unless ``method`` is in strict SSA form."""
    defs: dict[str, tuple[str, int]] = {}  # var -> (block label, index in block)
    entry = method.entry.label
    for p in method.params:
        defs[p] = (entry, -1)
    preds = method.pred_blocks
    for b in method.blocks:
        seen_body = False
        for i, s in enumerate(b.stmts):
            if isinstance(s, Phi):
                if seen_body:
                    raise SsaError(f"phi for {s.target} is not at the head of block {b.label}", s.target)
                labels = [l for l, _ in s.incoming]
                if len(set(labels)) != len(labels) or set(labels) != set(preds[b.label]):
                    raise SsaError(
                        f"phi for {s.target} in block {b.label} has incoming labels {labels}, "
                        f"expected {sorted(preds[b.label])}",
                        s.target,
                    )
            else:
                seen_body = True
            d = s.defined()
            if d is not None:
                if d in defs:
                    raise SsaError(f"variable {d} is defined more than once", d)
                defs[d] = (b.label, i)

    live = reachable_labels(method)
    dom = _Dominance(method)
    for b in method.blocks:
        if b.label not in live:
            continue
        for i, s in enumerate(b.stmts):
            if isinstance(s, Phi):
                for lab, v in s.incoming:
                    if v not in defs:
                        raise SsaError(f"variable {v} is used but never defined", v)
                    if lab in live and not dom.dominates(defs[v][0], lab):
                        raise SsaError(f"definition of {v} does not reach the end of block {lab}", v)
                continue
            for v in s.uses():
                if v not in defs:
                    raise SsaError(f"variable {v} is used but never defined", v)
                dblock, di = defs[v]
                ok = di < i if dblock == b.label else dom.dominates(dblock, b.label)
                if not ok:
                    raise SsaError(f"use of {v} in block {b.label} is not dominated by its definition", v)


def is_ssa(method: Method) -> bool:
    try:
        validate_ssa(method)
    except SsaError:
        return False
    return True


def _liveness(method: Method) -> dict[str, set[str]]:
    gen: dict[str, set[str]] = {}
    kill: dict[str, set[str]] = {}
    for b in method.blocks:
        g, k = set(), set()
        for s in b.stmts:
            g.update(u for u in s.uses() if u not in k)
            d = s.defined()
            if d is not None:
                k.add(d)
        gen[b.label], kill[b.label] = g, k
    live_in = {b.label: set() for b in method.blocks}
    changed = True
    while changed:
        changed = False
        for b in reversed(method.blocks):
            out = set()
            for s in method.succ_blocks[b.label]:
                out |= live_in[s]
            new = gen[b.label] | (out - kill[b.label])
            if new != live_in[b.label]:
                live_in[b.label] = new
                changed = True
    return live_in


def _rename_stmt(s: Stmt, use, define) -> Stmt:
    """Rewrite uses with ``use(var)`` first, then the definition with ``define(var)``."""
    changes = {}
    if isinstance(s, Assign):
        changes["source"] = use(s.source)
    elif isinstance(s, Load):
        changes["base"] = use(s.base)
    elif isinstance(s, Store):
        changes["base"] = use(s.base)
        changes["value"] = use(s.value)
    elif isinstance(s, BinOp):
        changes["left"] = use(s.left)
        changes["right"] = use(s.right)
    elif isinstance(s, Call):
        changes["args"] = tuple(use(a) for a in s.args)
    elif isinstance(s, VCall):
        changes["receiver"] = use(s.receiver)
        changes["args"] = tuple(use(a) for a in s.args)
    elif isinstance(s, Return) and s.value is not None:
        changes["value"] = use(s.value)
    elif isinstance(s, If):
        changes["cond"] = use(s.cond)
    d = s.defined()
    if d is not None:
        changes["target"] = define(d)
    return dataclasses.replace(s, **changes) if changes else s


def construct_ssa(method: Method, ids=None) -> Method:
    """Return an SSA-valid version of ``method``.

    Already-valid input is returned unchanged. Inserted phi statements draw
    their ids from ``ids`` (default: after the method's largest id).
    """
    method = prune_unreachable(method)
    if is_ssa(method):
        return method
    if any(isinstance(s, Phi) for s in method.statements()):
        validate_ssa(method)  # raises with the precise reason
    if ids is None:
        ids = count(max((s.id for s in method.statements()), default=0) + 1)

    dom = _Dominance(method)
    live_in = _liveness(method)
    entry = method.entry.label
    defsites: dict[str, set[str]] = defaultdict(set)
    for p in method.params:
        defsites[p].add(entry)
    for b in method.blocks:
        for s in b.stmts:
            d = s.defined()
            if d is not None:
                defsites[d].add(b.label)

    # phi placement at the iterated dominance frontier, pruned by liveness
    phi_vars: dict[str, list[str]] = defaultdict(list)
    order = {b.label: i for i, b in enumerate(method.blocks)}
    for var in sorted(defsites):
        work = sorted(defsites[var], key=order.__getitem__)
        placed: set[str] = set()
        while work:
            x = work.pop()
            for y in sorted(dom.frontier.get(x, ()), key=order.__getitem__):
                if y in placed or var not in live_in[y]:
                    continue
                placed.add(y)
                phi_vars[y].append(var)
                if y not in defsites[var]:
                    work.append(y)
    for y in phi_vars:
        phi_vars[y].sort()

    taken = {v for s in method.statements() for v in (*s.uses(), s.defined()) if v} | set(method.params)
    versions: dict[str, int] = defaultdict(int)
    stacks: dict[str, list[str]] = defaultdict(list)

    def fresh(var: str) -> str:
        n = versions[var]
        versions[var] += 1
        if n == 0:
            return var
        name = f"{var}_{n}"
        while name in taken:
            n = versions[var]
            versions[var] += 1
            name = f"{var}_{n}"
        taken.add(name)
        return name

    for p in method.params:
        stacks[p].append(fresh(p))

    new_phis: dict[str, list[tuple[str, str, dict[str, str]]]] = {
        y: [(var, "", {}) for var in vs] for y, vs in phi_vars.items()
    }
    new_body: dict[str, list[Stmt]] = {}

    def use(var: str) -> str:
        if not stacks[var]:
            raise SsaError(f"variable {var} is used before any definition", var)
        return stacks[var][-1]

    def rename(label: str) -> None:
        pushed: list[str] = []

        def define(var: str) -> str:
            name = fresh(var)
            stacks[var].append(name)
            pushed.append(var)
            return name

        block = method.block_map[label]
        phis = new_phis.get(label, [])
        for i, (var, _, ops) in enumerate(phis):
            phis[i] = (var, define(var), ops)
        body = [_rename_stmt(s, use, define) for s in block.stmts]
        new_body[label] = body
        for succ in method.succ_blocks[label]:
            for var, _, ops in new_phis.get(succ, []):
                ops[label] = use(var)
        for child in dom.children.get(label, []):
            rename(child)
        for var in pushed:
            stacks[var].pop()

    rename(entry)

    blocks = []
    for b in method.blocks:
        preds = method.pred_blocks[b.label]
        phis = [
            Phi(next(ids), b.stmts[0].line, target, tuple((p, ops[p]) for p in preds))
            for _, target, ops in new_phis.get(b.label, [])
        ]
        blocks.append(Block(b.label, tuple(phis + new_body[b.label])))
    return dataclasses.replace(method, blocks=tuple(blocks))


def _renumber(methods: dict[str, Method]) -> dict[str, Method]:
    ids = count(1)
    out = {}
    for name, m in methods.items():
        blocks = tuple(
            Block(b.label, tuple(dataclasses.replace(s, id=next(ids)) for s in b.stmts)) for b in m.blocks
        )
        out[name] = dataclasses.replace(m, blocks=blocks)
    return out


def prepare_program(program: Program) -> Program:
    """Prune unreachable code and bring every method into SSA form.

    Programs declared ``#ssa`` are only validated. Statement ids are
    renumbered in program order only when phi nodes had to be inserted.
    """
    top = max((s.id for m in program.methods.values() for s in m.statements()), default=0)
    ids = count(top + 1)
    methods: dict[str, Method] = {}
    inserted = False
    for name, m in program.methods.items():
        pruned = prune_unreachable(m)
        if program.ssa_declared:
            try:
                validate_ssa(pruned)
            except SsaError as exc:
                raise SsaError(f"method {name}: {exc}", exc.variable) from None
            methods[name] = pruned
            continue
        try:
            converted = construct_ssa(pruned, ids)
        except SsaError as exc:
            raise SsaError(f"method {name}: {exc}", exc.variable) from None
        inserted |= any(isinstance(s, Phi) for s in converted.statements()) and converted is not pruned
        methods[name] = converted
    if inserted:
        methods = _renumber(methods)
    return Program(program.classes, methods, ssa_declared=program.ssa_declared)
