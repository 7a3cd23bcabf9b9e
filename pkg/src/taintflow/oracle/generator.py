"""Seeded generator of small well-formed non-SSA programs for differential testing."""

from __future__ import annotations

import random
from dataclasses import dataclass

from taintflow.client import SanitizerSpec, SinkSpec, SourceSpec, TaintSpec

CORPUS_SPEC = TaintSpec(
    sources=[
        SourceSpec(method="getTainted", labels=["XSS", "SQLI"]),
        SourceSpec(method="readDb", labels=["SQLI"]),
    ],
    sinks=[
        SinkSpec(method="sink", arg=0, labels=["XSS"]),
        SinkSpec(method="exec", arg=0, labels=["SQLI"]),
        SinkSpec(method="log2", arg=1, labels=["XSS", "SQLI"]),
    ],
    sanitizers=[
        SanitizerSpec(method="clean", labels=["XSS"]),
        SanitizerSpec(method="escape", labels=["SQLI"]),
    ],
)

_SOURCES = ("getTainted", "readDb")
_SINKS = (("sink", 1), ("exec", 1), ("log2", 2))
_SANITIZERS = ("clean", "escape")
_EXTERNALS = ("ext", "concat")
_VNAMES = ("run", "get")


@dataclass(frozen=True)
class Limits:
    methods: int = 6
    blocks: int = 4
    fields: int = 3
    call_depth: int = 3
    stmts: int = 6  # per block, before forced source/sink calls
    loops: bool = True
    locals: int = 3

    def __post_init__(self):
        if not 1 <= self.methods <= 6:
            raise ValueError("methods must be in 1..6")
        if not 1 <= self.blocks <= 4:
            raise ValueError("blocks must be in 1..4")
        if not 1 <= self.fields <= 3:
            raise ValueError("fields must be in 1..3")
        if self.call_depth < 0 or self.stmts < 0 or self.locals < 2:
            raise ValueError("call_depth and stmts must be >= 0, locals >= 2")


@dataclass
class _Sig:
    name: str
    params: list[str]
    instance: bool

    @property
    def simple(self) -> str:
        return self.name.rsplit(".", 1)[-1]


class _Gen:
    def __init__(self, seed: int, limits: Limits):
        self.rng = random.Random(seed)
        self.limits = limits

    def program(self) -> str:
        rng, lim = self.rng, self.limits
        n_fields = lim.fields
        self.fields = [f"f{i}" for i in range(n_fields)]
        arrays = {f for f in self.fields if rng.random() < 0.25}
        two_classes = lim.methods > 1 and rng.random() < 0.6
        self.classes = ["A", "B"] if two_classes else ["A"]
        lines = []
        owned = {"A": self.fields[: max(1, n_fields - 1)], "B": self.fields[max(1, n_fields - 1):]}
        for cls in self.classes:
            head = f"type {cls}" + (" extends A" if cls == "B" else "")
            fl = owned[cls] if two_classes else self.fields
            body = "".join(f"  field {f}{'[]' if f in arrays else ''};\n" for f in fl)
            lines.append(f"{head} {{\n{body}}}" if body else f"{head} {{ }}")

        sigs = self._signatures()
        self.depth = {}
        texts = []
        for idx in reversed(range(len(sigs))):
            texts.append(self._method(idx, sigs))
        lines.extend(reversed(texts))
        return "\n".join(lines) + "\n"

    def _signatures(self) -> list[_Sig]:
        rng, lim = self.rng, self.limits
        sigs = [_Sig("main", [], False)]
        for i in range(1, lim.methods):
            if rng.random() < 0.4:
                cls = rng.choice(self.classes)
                name = f"{cls}.{rng.choice(_VNAMES)}"
                if any(s.name == name for s in sigs):
                    name = f"{cls}.m{i}"
                sigs.append(_Sig(name, ["this"] + [f"p{j}" for j in range(rng.randint(0, 2))], True))
            else:
                sigs.append(_Sig(f"m{i}", [f"p{j}" for j in range(rng.randint(0, 3))], False))
        return sigs

    def _method(self, idx: int, sigs: list[_Sig]) -> str:
        rng, lim = self.rng, self.limits
        sig = sigs[idx]
        # callees: later methods only, so the call graph is acyclic and depth-bounded
        callees = [j for j in range(idx + 1, len(sigs)) if self.depth[j] + 1 <= lim.call_depth]
        self.depth[idx] = 1 + max((self.depth[j] for j in callees), default=-1)
        self.callees = [sigs[j] for j in callees]
        self.sigs = sigs
        self.vars = list(sig.params) + [f"v{i}" for i in range(lim.locals)]
        self.locals = self.vars[len(sig.params):]

        n_blocks = 1 if lim.methods == 1 else rng.randint(1, lim.blocks)
        shape = self._shape(n_blocks)
        blocks = {lab: [] for lab, _ in shape}
        # every local gets a definition in the entry block first
        entry = shape[0][0]
        for v in self.locals:
            blocks[entry].append(self._init(v))
        for lab, _ in shape:
            for _ in range(rng.randint(0, lim.stmts)):
                blocks[lab].append(self._stmt())
        if idx == 0:
            body_labels = [lab for lab, _ in shape]
            src_lab = body_labels[0]
            sink_lab = body_labels[-1]
            blocks[src_lab].insert(len(self.locals), self._source())
            blocks[sink_lab].append(self._sink())

        out = [f"method {sig.name}({', '.join(sig.params)}) {{"]
        for lab, term in shape:
            out.append(f"{lab}:")
            out.extend(f"  {s}" for s in blocks[lab])
            out.append(f"  {term}")
        out.append("}")
        return "\n".join(out)

    def _shape(self, n: int) -> list[tuple[str, str]]:
        rng = self.rng
        ret = self._return()
        c = rng.choice(self.vars)
        if n == 1:
            return [("L0", ret)]
        if n == 2:
            return [("L0", "goto L1;"), ("L1", ret)]
        if n == 3:
            if self.limits.loops and rng.random() < 0.4:
                return [("L0", "goto L1;"), ("L1", f"if {c} goto L1 else L2;"), ("L2", ret)]
            return [("L0", f"if {c} goto L1 else L2;"), ("L1", "goto L2;"), ("L2", ret)]
        if self.limits.loops and rng.random() < 0.4:
            return [
                ("L0", "goto L1;"),
                ("L1", f"if {c} goto L2 else L3;"),
                ("L2", "goto L1;"),
                ("L3", ret),
            ]
        return [
            ("L0", f"if {c} goto L1 else L2;"),
            ("L1", "goto L3;"),
            ("L2", "goto L3;"),
            ("L3", ret),
        ]

    def _return(self) -> str:
        if self.rng.random() < 0.75:
            return f"return {self.rng.choice(self.vars)};"
        return "return;"

    def _init(self, v: str) -> str:
        r = self.rng.random()
        if r < 0.7:
            return f"{v} = new {self.rng.choice(self.classes)};"
        return f'{v} = "{v}";'

    def _field(self) -> str:
        # skewed so that stores and loads meet on the same field often
        return self.fields[min(int(self.rng.expovariate(1.5)), len(self.fields) - 1)]

    def _v(self) -> str:
        return self.rng.choice(self.vars)

    def _t(self) -> str:
        return self.rng.choice(self.locals)

    def _source(self) -> str:
        return f"{self._t()} = call {self.rng.choice(_SOURCES)}();"

    def _sink(self) -> str:
        name, arity = self.rng.choice(_SINKS)
        return f"call {name}({', '.join(self._v() for _ in range(arity))});"

    def _stmt(self) -> str:
        rng = self.rng
        kinds = ["assign", "load", "load", "store", "store", "binop", "const", "new",
                 "source", "sink", "sanitize", "external", "call", "call", "vcall",
                 "roundtrip", "nested", "nested"]
        kind = rng.choice(kinds)
        f = self._field()
        if kind == "roundtrip":
            base = self._v()
            return f"{base}.{f} = {self._v()};\n  {self._t()} = {base}.{self._field()};"
        if kind == "nested":
            t = self._t()
            return f"{t} = {self._v()}.{f};\n  {t}.{self._field()} = {self._v()};"
        if kind == "assign":
            return f"{self._t()} = {self._v()};"
        if kind == "load":
            return f"{self._t()} = {self._v()}.{f};"
        if kind == "store":
            return f"{self._v()}.{f} = {self._v()};"
        if kind == "binop":
            return f"{self._t()} = binop({self._v()}, {self._v()});"
        if kind == "const":
            return f'{self._t()} = "k";'
        if kind == "new":
            return f"{self._t()} = new {rng.choice(self.classes)};"
        if kind == "source":
            return self._source()
        if kind == "sink":
            return self._sink()
        if kind == "sanitize":
            return f"{self._t()} = call {rng.choice(_SANITIZERS)}({self._v()});"
        if kind == "external":
            args = ", ".join(self._v() for _ in range(rng.randint(1, 2)))
            return f"{self._t()} = call {rng.choice(_EXTERNALS)}({args});"
        direct = [s for s in self.callees if not s.instance]
        # a virtual name is usable only if every method it may dispatch to is a legal callee
        virtual = [
            s for s in self.callees
            if s.instance and all(
                o in self.callees for o in self.sigs if o.instance and o.simple == s.simple
            )
        ]
        if kind == "call" and direct:
            s = rng.choice(direct)
            call = f"call {s.name}({', '.join(self._v() for _ in s.params)})"
        elif virtual:
            s = rng.choice(virtual)
            call = f"vcall {self._v()}.{s.simple}({', '.join(self._v() for _ in s.params[1:])})"
        else:
            return f"{self._t()} = {self._v()}.{f};"
        return f"{self._t()} = {call};" if rng.random() < 0.8 else f"{call};"


def generate_program(seed: int, limits: Limits | None = None) -> str:
    """Deterministic pseudo-random program text for ``seed``."""
    return _Gen(seed, limits or Limits()).program()
