"""Interned, k-limited access paths and the null fact.

An :class:`Interner` hands out exactly one :class:`AccessPath` object per
distinct ``(base, fields)`` pair, so equality is object identity. One
interner lives for one analysis run and is never evicted.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence, Union

RET = "<ret>"


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __bool__(self) -> bool:
        return False


TOO_LONG = _Sentinel("TooLong")
NO_MATCH = _Sentinel("NoMatch")


class Zero:
    """The null fact. Holds everywhere; reaching it backward proves taint."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "0"

    __str__ = __repr__

    def __reduce__(self):
        return (Zero, ())


ZERO = Zero()


class AccessPath:
    __slots__ = ("base", "fields", "_hash", "__weakref__")

    def __init__(self, base: str, fields: tuple[str, ...]):
        self.base = base
        self.fields = fields
        self._hash = hash((base, fields))

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.fields)

    def __repr__(self) -> str:
        return ".".join((self.base, *self.fields))

    __str__ = __repr__

    def __lt__(self, other: "AccessPath") -> bool:
        return (self.base, self.fields) < (other.base, other.fields)


Fact = Union[AccessPath, Zero]


def render(fact) -> str:
    return str(fact)


@dataclass(frozen=True)
class KConfig:
    k: int = 5

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")


class Interner:
    """Flyweight factory for access paths; safe to share between threads."""

    def __init__(self, config: KConfig | None = None):
        self.config = config or KConfig()
        self._table: dict[tuple[str, tuple[str, ...]], AccessPath] = {}
        self._lock = threading.Lock()

    @property
    def k(self) -> int:
        return self.config.k

    def __len__(self) -> int:
        return len(self._table)

    def make(self, base: str, fields: Sequence[str] = ()) -> AccessPath | _Sentinel:
        fields = tuple(fields)
        if len(fields) > self.config.k:
            return TOO_LONG
        key = (base, fields)
        ap = self._table.get(key)
        if ap is None:
            with self._lock:
                ap = self._table.setdefault(key, AccessPath(base, fields))
        return ap

    def with_base(self, ap: AccessPath, base: str) -> AccessPath:
        if ap.base == base:
            return ap
        return self.make(base, ap.fields)

    def prepend_fields(
        self, ap: AccessPath, prefix: Sequence[str], base: str | None = None
    ) -> AccessPath | _Sentinel:
        """``base.prefix.ap.fields``; TOO_LONG when the total exceeds k."""
        prefix = tuple(prefix)
        if len(prefix) + len(ap.fields) > self.config.k:
            return TOO_LONG
        if not prefix and (base is None or base == ap.base):
            return ap
        return self.make(ap.base if base is None else base, prefix + ap.fields)


def strip_prefix(ap: AccessPath, prefix: Sequence[str]) -> tuple[str, ...] | _Sentinel:
    prefix = tuple(prefix)
    m = len(prefix)
    if m > len(ap.fields) or ap.fields[:m] != prefix:
        return NO_MATCH
    return ap.fields[m:]
