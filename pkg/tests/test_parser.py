import pytest

from taintflow.errors import ParseError, ResolveError
from taintflow.frontend import format_program, parse_program, tokenize
from taintflow.ir import Alloc, BinOp, Call, Const, If, Load, Phi, Return, Store, VCall

from conftest import DATA


def test_tokenizer_skips_comments_and_keeps_strings():
    kinds = [t.text for t in tokenize('x = "a b"; // trailing', "<t>") if t.text]
    assert kinds[:3] == ["x", "=", '"a b"']
    assert "trailing" not in kinds


def test_statement_kinds_and_source_order_ids():
    prog = parse_program(
        """
        type T { field f; field arr[]; }
        method T.m(this, a) {
        L0:
          x = new T;
          y = "c";
          z = x.f;
          x.arr = a;
          w = binop(y, z);
          r = vcall x.m(w);
          call ext(r);
          if r goto L1 else L1;
        L1:
          return r;
        }
        """
    )
    stmts = list(prog.methods["T.m"].statements())
    kinds = [type(s) for s in stmts]
    assert kinds == [Alloc, Const, Load, Store, BinOp, VCall, Call, If, Return]
    assert [s.id for s in stmts] == list(range(1, 10))
    assert prog.array_fields == {"arr"}
    assert stmts[5].actuals == ("x", "w")


def test_round_trip_is_stable():
    text = (DATA / "box_copy.ir").read_text()
    once = format_program(parse_program(text))
    assert format_program(parse_program(once)) == once


def test_phi_parses_with_labels():
    prog = parse_program(
        """#ssa
        method m(a) {
        L0:
          if a goto L1 else L2;
        L1:
          goto L2;
        L2:
          x = phi(L0: a, L1: a);
          return x;
        }
        """
    )
    phi = next(s for s in prog.methods["m"].statements() if isinstance(s, Phi))
    assert phi.operand("L1") == "a"
    assert phi.operand("nope") is None
    assert prog.ssa_declared


def test_empty_program():
    prog = parse_program("")
    assert prog.methods == {} and prog.classes == {}


@pytest.mark.parametrize(
    "text, needle",
    [
        ("method m() {\nL0:\n  goto L9;\n}", "undefined label"),
        ("method m() {\nL0:\n  goto L1;\nL1:\n  return;\nL1:\n  return;\n}", "duplicate block label"),
        ("method m() {\nL0:\n  goto L1;\nL1:\n  goto L0;\n}", "entry"),
        ("method m() {\nL0:\n  x = \"a\";\n}", "terminator"),
        ("method m() {\nL0:\n  x = ;\n}", "expected"),
        ("method m() { }", "no blocks"),
    ],
)
def test_parse_errors(text, needle):
    with pytest.raises(ParseError) as exc:
        parse_program(text, "bad.ir")
    assert needle in str(exc.value)
    assert exc.value.filename == "bad.ir"


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_program("method m() {\nL0:\n  x = $;\n}")
    assert exc.value.line == 3


@pytest.mark.parametrize(
    "text, needle",
    [
        ("type A { }\ntype A { }", "duplicate type"),
        ("type A extends Z { }", "undeclared type Z"),
        ("type A extends B { }\ntype B extends A { }", "cyclic"),
        ("method Q.m(this) {\nL0:\n  return;\n}", "Q"),
        ("type A { }\nmethod A.m() {\nL0:\n  return;\n}", "receiver"),
        ("method m() {\nL0:\n  x = new Nope;\n  return;\n}", "undeclared type Nope"),
        ("method m(a) {\nL0:\n  x = a.g;\n  return;\n}", "undeclared field g"),
        ("method m(a) {\nL0:\n  return;\n}\nmethod n() {\nL0:\n  call m();\n  return;\n}", "expects 1"),
        ("method m() {\nL0:\n  return;\n}\nmethod m() {\nL0:\n  return;\n}", "duplicate method"),
    ],
)
def test_resolve_errors(text, needle):
    with pytest.raises(ResolveError) as exc:
        parse_program(text)
    assert needle in str(exc.value)


def test_superclass_lookup():
    prog = parse_program(
        """
        type A { field f; }
        type B extends A { }
        method A.get(this) {
        L0:
          return this;
        }
        """
    )
    assert prog.lookup("B", "get").name == "A.get"
    assert prog.lookup("B", "put") is None
    assert prog.subclasses("A") == ["A", "B"]
