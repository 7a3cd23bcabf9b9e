"""Textual IR frontend: parsing, linking, SSA."""

from __future__ import annotations

from pathlib import Path

from taintflow.frontend.parser import format_program, format_stmt, parse_program, parse_units, tokenize
from taintflow.frontend.ssa import construct_ssa, prepare_program, prune_unreachable, validate_ssa
from taintflow.ir import Program

__all__ = [
    "construct_ssa",
    "format_program",
    "format_stmt",
    "load_program",
    "parse_program",
    "parse_units",
    "prepare_program",
    "prune_unreachable",
    "tokenize",
    "validate_ssa",
]


def load_program(*paths: str | Path) -> Program:
    """Read, link and SSA-prepare the given IR files as one program."""
    sources = [(Path(p).read_text(encoding="utf-8"), str(p)) for p in paths]
    return prepare_program(parse_units(sources))


def load_text(text: str, filename: str = "<input>") -> Program:
    return prepare_program(parse_program(text, filename))
