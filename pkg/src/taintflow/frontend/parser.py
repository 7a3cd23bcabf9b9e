"""Recursive-descent parser and pretty-printer for the textual IR."""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import count
from typing import Iterable, Iterator

from taintflow.errors import ParseError, ResolveError
from taintflow.ir import (
    Alloc,
    Assign,
    BinOp,
    Block,
    Call,
    ClassDecl,
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
    successors,
)

KEYWORDS = frozenset(
    "type extends field method new binop call vcall phi goto if else return".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<directive>\#ssa\b)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>\[\]|[{}();,.=:])
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        value = m.group()
        col = m.start() - line_start + 1
        if kind == "bad":
            raise ParseError(f"unexpected character {value!r}", line, col, filename)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + value.rindex("\n") + 1
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


@dataclass
class _RawMethod:
    name: str
    params: tuple[str, ...]
    blocks: list[Block]
    line: int


@dataclass
class _Unit:
    filename: str
    ssa: bool
    classes: list[tuple[ClassDecl, int]]
    methods: list[_RawMethod]


class _Parser:
    def __init__(self, text: str, filename: str, ids: Iterator[int]):
        self.tokens = tokenize(text, filename)
        self.pos = 0
        self.filename = filename
        self.ids = ids

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col, self.filename)

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("punct", "name")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def name(self, what: str = "name") -> str:
        tok = self.tok
        if tok.kind != "name" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return tok.text

    def qname(self) -> str:
        first = self.name("qualified name")
        if self.at(".") and self.peek().kind == "name":
            self.advance()
            return f"{first}.{self.name('method name')}"
        return first

    def var_list(self) -> tuple[str, ...]:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.name("variable"))
            while self.at(","):
                self.advance()
                out.append(self.name("variable"))
        self.expect(")")
        return tuple(out)

    # grammar
    def unit(self) -> _Unit:
        unit = _Unit(self.filename, False, [], [])
        while self.tok.kind != "eof":
            if self.tok.kind == "directive":
                self.advance()
                unit.ssa = True
            elif self.at("type"):
                unit.classes.append(self.typedecl())
            elif self.at("method"):
                unit.methods.append(self.methdecl())
            else:
                raise self.error(f"expected declaration, found {self.tok.text!r}")
        return unit

    def typedecl(self) -> tuple[ClassDecl, int]:
        line = self.expect("type").line
        name = self.name("type name")
        sup = None
        if self.at("extends"):
            self.advance()
            sup = self.name("type name")
        self.expect("{")
        fields = []
        seen = set()
        while self.at("field"):
            ftok = self.advance()
            fname = self.name("field name")
            if fname in seen:
                raise self.error(f"duplicate field {fname!r}", ftok)
            seen.add(fname)
            is_array = False
            if self.at("[]"):
                self.advance()
                is_array = True
            self.expect(";")
            fields.append((fname, is_array))
        self.expect("}")
        return ClassDecl(name, sup, tuple(fields)), line

    def methdecl(self) -> _RawMethod:
        line = self.expect("method").line
        name = self.qname()
        params = self.var_list()
        if len(set(params)) != len(params):
            raise self.error(f"duplicate parameter in method {name}")
        self.expect("{")
        blocks: list[Block] = []
        labels: set[str] = set()
        while not self.at("}"):
            ltok = self.tok
            label = self.name("block label")
            if label in labels:
                raise self.error(f"duplicate block label {label!r}", ltok)
            labels.add(label)
            self.expect(":")
            blocks.append(Block(label, self.block_body(label)))
        if not blocks:
            raise self.error(f"method {name} has no blocks")
        self.expect("}")
        for b in blocks:
            for target in successors(b.terminator):
                if target not in labels:
                    term = b.terminator
                    raise ParseError(f"undefined label {target!r}", term.line, 0, self.filename)
                if target == blocks[0].label:
                    raise ParseError(
                        f"entry block {target!r} cannot be a branch target",
                        b.terminator.line, 0, self.filename,
                    )
        return _RawMethod(name, params, blocks, line)

    def block_body(self, label: str) -> tuple[Stmt, ...]:
        stmts: list[Stmt] = []
        while True:
            if self.at("}") or self.tok.kind == "eof" or (
                self.tok.kind == "name" and self.tok.text not in KEYWORDS and self.peek().text == ":"
            ):
                raise self.error(f"block {label!r} does not end in a terminator")
            stmt = self.statement()
            stmts.append(stmt)
            if isinstance(stmt, (Goto, If, Return)):
                return tuple(stmts)

    def statement(self) -> Stmt:
        tok = self.tok
        line = tok.line

        def mk(cls, *args):
            return cls(next(self.ids), line, *args)

        if self.at("goto"):
            self.advance()
            label = self.name("label")
            self.expect(";")
            return mk(Goto, label)
        if self.at("if"):
            self.advance()
            cond = self.name("variable")
            self.expect("goto")
            then = self.name("label")
            self.expect("else")
            other = self.name("label")
            self.expect(";")
            return mk(If, cond, then, other)
        if self.at("return"):
            self.advance()
            value = None
            if not self.at(";"):
                value = self.name("variable")
            self.expect(";")
            return mk(Return, value)
        if self.at("call") or self.at("vcall"):
            return self.call(None, mk)

        target = self.name("variable")
        if self.at("."):
            self.advance()
            fname = self.name("field name")
            self.expect("=")
            value = self.name("variable")
            self.expect(";")
            return mk(Store, target, fname, value)
        self.expect("=")
        if self.at("new"):
            self.advance()
            tname = self.name("type name")
            self.expect(";")
            return mk(Alloc, target, tname)
        if self.tok.kind == "string":
            lit = self.advance().text[1:-1]
            self.expect(";")
            return mk(Const, target, lit)
        if self.at("binop"):
            self.advance()
            self.expect("(")
            left = self.name("variable")
            self.expect(",")
            right = self.name("variable")
            self.expect(")")
            self.expect(";")
            return mk(BinOp, target, left, right)
        if self.at("call") or self.at("vcall"):
            return self.call(target, mk)
        if self.at("phi"):
            self.advance()
            self.expect("(")
            incoming = [self.phi_operand()]
            while self.at(","):
                self.advance()
                incoming.append(self.phi_operand())
            self.expect(")")
            self.expect(";")
            return mk(Phi, target, tuple(incoming))
        source = self.name("variable")
        if self.at("."):
            self.advance()
            fname = self.name("field name")
            self.expect(";")
            return mk(Load, target, source, fname)
        self.expect(";")
        return mk(Assign, target, source)

    def phi_operand(self) -> tuple[str, str]:
        label = self.name("label")
        self.expect(":")
        return label, self.name("variable")

    def call(self, target, mk) -> Stmt:
        if self.advance().text == "call":
            callee = self.qname()
            args = self.var_list()
            self.expect(";")
            return mk(Call, target, callee, args)
        receiver = self.name("variable")
        self.expect(".")
        method = self.name("method name")
        args = self.var_list()
        self.expect(";")
        return mk(VCall, target, receiver, method, args)


def _check_hierarchy(classes: dict[str, ClassDecl]) -> None:
    for c in classes.values():
        if c.superclass is not None and c.superclass not in classes:
            raise ResolveError(f"type {c.name} extends undeclared type {c.superclass}")
    for c in classes.values():
        seen = {c.name}
        t = c.superclass
        while t is not None:
            if t in seen:
                raise ResolveError(f"cyclic superclass chain through {c.name}")
            seen.add(t)
            t = classes[t].superclass


def _link(units: Iterable[_Unit]) -> Program:
    units = list(units)
    classes: dict[str, ClassDecl] = {}
    for unit in units:
        for decl, line in unit.classes:
            if decl.name in classes:
                raise ResolveError(f"{unit.filename}:{line}: duplicate type {decl.name}")
            classes[decl.name] = decl
    _check_hierarchy(classes)
    fields = {n for c in classes.values() for n, _ in c.fields}

    methods: dict[str, Method] = {}
    for unit in units:
        for raw in unit.methods:
            if raw.name in methods:
                raise ResolveError(f"{unit.filename}:{raw.line}: duplicate method {raw.name}")
            owner = raw.name.rsplit(".", 1)[0] if "." in raw.name else None
            if owner is not None and owner not in classes:
                raise ResolveError(
                    f"{unit.filename}:{raw.line}: method {raw.name} declared on undeclared type {owner}"
                )
            if owner is not None and not raw.params:
                raise ResolveError(
                    f"{unit.filename}:{raw.line}: instance method {raw.name} needs a receiver parameter"
                )
            methods[raw.name] = Method(
                raw.name, raw.params, tuple(raw.blocks), is_instance=owner is not None, line=raw.line
            )

    for unit in units:
        for raw in unit.methods:
            for block in raw.blocks:
                for s in block.stmts:
                    where = f"{unit.filename}:{s.line}"
                    if isinstance(s, Alloc) and s.type_name not in classes:
                        raise ResolveError(f"{where}: undeclared type {s.type_name}")
                    if isinstance(s, (Load, Store)) and s.field not in fields:
                        raise ResolveError(f"{where}: undeclared field {s.field}")
                    if isinstance(s, Call) and s.callee in methods:
                        callee = methods[s.callee]
                        if len(callee.params) != len(s.args):
                            raise ResolveError(
                                f"{where}: {s.callee} expects {len(callee.params)} arguments, got {len(s.args)}"
                            )
    ssa = bool(units) and all(u.ssa for u in units if u.methods) and any(u.ssa for u in units)
    return Program(classes, methods, ssa_declared=ssa)


def parse_units(sources: Iterable[tuple[str, str]]) -> Program:
    """Parse several ``(text, filename)`` pairs and link them into one program.

    Statement ids are assigned in source order across all inputs.
    """
    ids = count(1)
    return _link(_Parser(text, filename, ids).unit() for text, filename in sources)


def parse_program(source_text: str, filename: str = "<input>") -> Program:
    return parse_units([(source_text, filename)])


# pretty-printing


def format_stmt(s: Stmt) -> str:
    def args(xs):
        return "(" + ", ".join(xs) + ")"

    def assigned(target, rhs):
        return f"{target} = {rhs};" if target is not None else f"{rhs};"

    if isinstance(s, Alloc):
        return f"{s.target} = new {s.type_name};"
    if isinstance(s, Assign):
        return f"{s.target} = {s.source};"
    if isinstance(s, Const):
        return f'{s.target} = "{s.value}";'
    if isinstance(s, Load):
        return f"{s.target} = {s.base}.{s.field};"
    if isinstance(s, Store):
        return f"{s.base}.{s.field} = {s.value};"
    if isinstance(s, BinOp):
        return f"{s.target} = binop({s.left}, {s.right});"
    if isinstance(s, Call):
        return assigned(s.target, f"call {s.callee}{args(s.args)}")
    if isinstance(s, VCall):
        return assigned(s.target, f"vcall {s.receiver}.{s.method}{args(s.args)}")
    if isinstance(s, Phi):
        ops = ", ".join(f"{lab}: {v}" for lab, v in s.incoming)
        return f"{s.target} = phi({ops});"
    if isinstance(s, Return):
        return f"return {s.value};" if s.value is not None else "return;"
    if isinstance(s, Goto):
        return f"goto {s.label};"
    if isinstance(s, If):
        return f"if {s.cond} goto {s.then_label} else {s.else_label};"
    raise TypeError(f"unknown statement {s!r}")


def format_program(program: Program) -> str:
    lines = []
    if program.ssa_declared:
        lines.append("#ssa")
    for c in program.classes.values():
        head = f"type {c.name}" + (f" extends {c.superclass}" if c.superclass else "")
        if not c.fields:
            lines.append(head + " { }")
            continue
        lines.append(head + " {")
        for fname, is_array in c.fields:
            lines.append(f"  field {fname}{'[]' if is_array else ''};")
        lines.append("}")
    for m in program.methods.values():
        lines.append(f"method {m.name}({', '.join(m.params)}) {{")
        for b in m.blocks:
            lines.append(f"{b.label}:")
            for s in b.stmts:
                lines.append(f"  {format_stmt(s)}")
        lines.append("}")
    return "\n".join(lines) + "\n"
