"""Program model for the three-address IR.

Statements are frozen dataclasses; a :class:`Program` is built once by the
frontend and never mutated afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping


@dataclass(frozen=True)
class Stmt:
    id: int
    line: int

    def defined(self) -> str | None:
        return None

    def uses(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Alloc(Stmt):
    target: str
    type_name: str

    def defined(self):
        return self.target


@dataclass(frozen=True)
class Assign(Stmt):
    target: str
    source: str

    def defined(self):
        return self.target

    def uses(self):
        return (self.source,)


@dataclass(frozen=True)
class Const(Stmt):
    target: str
    value: str

    def defined(self):
        return self.target


@dataclass(frozen=True)
class Load(Stmt):
    target: str
    base: str
    field: str

    def defined(self):
        return self.target

    def uses(self):
        return (self.base,)


@dataclass(frozen=True)
class Store(Stmt):
    base: str
    field: str
    value: str

    def uses(self):
        return (self.base, self.value)


@dataclass(frozen=True)
class BinOp(Stmt):
    target: str
    left: str
    right: str

    def defined(self):
        return self.target

    def uses(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Call(Stmt):
    target: str | None
    callee: str
    args: tuple[str, ...]

    def defined(self):
        return self.target

    def uses(self):
        return self.args

    @property
    def actuals(self) -> tuple[str, ...]:
        """Arguments in callee-parameter order."""
        return self.args

    @property
    def name(self) -> str:
        return self.callee.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class VCall(Stmt):
    target: str | None
    receiver: str
    method: str
    args: tuple[str, ...]

    def defined(self):
        return self.target

    def uses(self):
        return (self.receiver, *self.args)

    @property
    def actuals(self) -> tuple[str, ...]:
        return (self.receiver, *self.args)

    @property
    def name(self) -> str:
        return self.method


@dataclass(frozen=True)
class Phi(Stmt):
    target: str
    incoming: tuple[tuple[str, str], ...]  # (pred label, var)

    def defined(self):
        return self.target

    def uses(self):
        return tuple(v for _, v in self.incoming)

    def operand(self, label: str) -> str | None:
        for lab, var in self.incoming:
            if lab == label:
                return var
        return None


@dataclass(frozen=True)
class Return(Stmt):
    value: str | None

    def uses(self):
        return (self.value,) if self.value is not None else ()


@dataclass(frozen=True)
class Goto(Stmt):
    label: str


@dataclass(frozen=True)
class If(Stmt):
    cond: str
    then_label: str
    else_label: str

    def uses(self):
        return (self.cond,)


CallStmt = (Call, VCall)
TERMINATORS = (Return, Goto, If)


def successors(term: Stmt) -> tuple[str, ...]:
    if isinstance(term, Goto):
        return (term.label,)
    if isinstance(term, If):
        if term.then_label == term.else_label:
            return (term.then_label,)
        return (term.then_label, term.else_label)
    return ()


@dataclass(frozen=True)
class Block:
    label: str
    stmts: tuple[Stmt, ...]

    @property
    def phis(self) -> tuple[Phi, ...]:
        return tuple(s for s in self.stmts if isinstance(s, Phi))

    @property
    def body(self) -> tuple[Stmt, ...]:
        """Non-phi statements, terminator last."""
        return tuple(s for s in self.stmts if not isinstance(s, Phi))

    @property
    def terminator(self) -> Stmt:
        return self.stmts[-1]


@dataclass(frozen=True)
class ClassDecl:
    name: str
    superclass: str | None = None
    fields: tuple[tuple[str, bool], ...] = ()  # (name, is_array)


@dataclass(frozen=True, eq=False)
class Method:
    name: str
    params: tuple[str, ...]
    blocks: tuple[Block, ...]
    is_instance: bool = False
    line: int = 0

    @property
    def entry(self) -> Block:
        return self.blocks[0]

    @property
    def owner(self) -> str | None:
        return self.name.rsplit(".", 1)[0] if self.is_instance else None

    @property
    def simple_name(self) -> str:
        return self.name.rsplit(".", 1)[-1]

    def statements(self) -> Iterator[Stmt]:
        for block in self.blocks:
            yield from block.stmts

    @cached_property
    def block_map(self) -> dict[str, Block]:
        return {b.label: b for b in self.blocks}

    @cached_property
    def succ_blocks(self) -> dict[str, tuple[str, ...]]:
        return {b.label: successors(b.terminator) for b in self.blocks}

    @cached_property
    def pred_blocks(self) -> dict[str, tuple[str, ...]]:
        preds: dict[str, list[str]] = {b.label: [] for b in self.blocks}
        for b in self.blocks:
            for s in self.succ_blocks[b.label]:
                if b.label not in preds[s]:
                    preds[s].append(b.label)
        return {k: tuple(v) for k, v in preds.items()}

    @cached_property
    def defs(self) -> dict[str, Stmt]:
        """Variable -> defining statement. Only meaningful in SSA form."""
        out: dict[str, Stmt] = {}
        for s in self.statements():
            d = s.defined()
            if d is not None:
                out.setdefault(d, s)
        return out

    @cached_property
    def returns(self) -> tuple[Return, ...]:
        return tuple(s for s in self.statements() if isinstance(s, Return))

    @cached_property
    def entry_stmt(self) -> Stmt:
        return self.entry.body[0]

    @cached_property
    def block_of(self) -> dict[int, Block]:
        return {s.id: b for b in self.blocks for s in b.stmts}

    @cached_property
    def _position(self) -> dict[int, tuple[Block, int]]:
        out = {}
        for b in self.blocks:
            for i, s in enumerate(b.body):
                out[s.id] = (b, i)
        return out

    def previous(self, stmt: Stmt) -> Stmt | None:
        """Previous non-phi statement in the same block, or None at a block head."""
        block, i = self._position[stmt.id]
        return block.body[i - 1] if i > 0 else None

    def is_block_head(self, stmt: Stmt) -> bool:
        return self._position[stmt.id][1] == 0

    def param_index(self, var: str) -> int | None:
        try:
            return self.params.index(var)
        except ValueError:
            return None

    def canonical_param(self, index: int) -> str:
        if self.is_instance:
            return "this" if index == 0 else f"arg{index - 1}"
        return f"arg{index}"


@dataclass(frozen=True, eq=False)
class Program:
    classes: Mapping[str, ClassDecl] = field(default_factory=dict)
    methods: Mapping[str, Method] = field(default_factory=dict)
    ssa_declared: bool = False

    @cached_property
    def stmt_index(self) -> dict[int, tuple[Method, Stmt]]:
        return {s.id: (m, s) for m in self.methods.values() for s in m.statements()}

    def stmt(self, stmt_id: int) -> Stmt:
        return self.stmt_index[stmt_id][1]

    def method_of(self, stmt_id: int) -> Method:
        return self.stmt_index[stmt_id][0]

    @cached_property
    def array_fields(self) -> frozenset[str]:
        return frozenset(n for c in self.classes.values() for n, arr in c.fields if arr)

    @cached_property
    def field_names(self) -> frozenset[str]:
        names = {n for c in self.classes.values() for n, _ in c.fields}
        for m in self.methods.values():
            for s in m.statements():
                if isinstance(s, (Load, Store)):
                    names.add(s.field)
        return frozenset(names)

    def subclasses(self, name: str) -> list[str]:
        """``name`` and all its transitive subclasses, sorted."""
        out = {name}
        changed = True
        while changed:
            changed = False
            for c in self.classes.values():
                if c.superclass in out and c.name not in out:
                    out.add(c.name)
                    changed = True
        return sorted(out)

    def lookup(self, type_name: str, method: str) -> Method | None:
        """Dispatch ``method`` on dynamic type ``type_name`` (walks superclasses)."""
        seen = set()
        t: str | None = type_name
        while t is not None and t not in seen:
            seen.add(t)
            m = self.methods.get(f"{t}.{method}")
            if m is not None and m.is_instance:
                return m
            decl = self.classes.get(t)
            t = decl.superclass if decl else None
        return None
