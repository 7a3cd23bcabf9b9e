from pathlib import Path

import pytest

from taintflow.frontend import load_program, load_text

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def concat_prog():
    return load_program(DATA / "concat.ir")


@pytest.fixture
def box_prog():
    return load_program(DATA / "box_copy.ir")


def program(text: str):
    """Parse and SSA-prepare inline IR."""
    return load_text(text, "<test>")


def stmt_of(prog, method: str, kind, index: int = 0):
    found = [s for s in prog.methods[method].statements() if isinstance(s, kind)]
    return found[index]
