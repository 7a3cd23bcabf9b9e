import pytest

from taintflow.access_path import ZERO, Interner
from taintflow.callgraph import build_callgraph
from taintflow.client import DEFAULT_SPEC, make_queries, roles_for
from taintflow.errors import BudgetExceeded, InvalidSummary
from taintflow.flow import handle_external
from taintflow.ir import Call, VCall
from taintflow.solver import Hit, SolverConfig, map_to_callee, map_to_caller, solve

from conftest import program, stmt_of


def _solve(prog, **cfg):
    cg = build_callgraph(prog)
    (query,) = make_queries(prog, cg, DEFAULT_SPEC)
    roles = roles_for(prog, cg, DEFAULT_SPEC, query.label)
    it = Interner()
    return solve(prog, cg, roles, (query.sink_stmt, it.make(query.var)), SolverConfig(**cfg), it)


def test_map_to_callee_examples(box_prog):
    it = Interner()
    copy_call = stmt_of(box_prog, "foo", Call, 1)
    put_call = stmt_of(box_prog, "copy", VCall, 1)
    copy, put = box_prog.methods["copy"], box_prog.methods["Box.put"]
    assert repr(map_to_callee(copy_call, it.make("box2", ("f",)), copy, it)[0]) == "<ret>.f"
    assert repr(map_to_callee(put_call, it.make("cpy", ("f",)), put, it)[0]) == "this.f"
    assert map_to_callee(put_call, it.make("unrelated", ("g",)), put, it) == ()


def test_map_to_caller_examples(box_prog):
    it = Interner()
    get_call = stmt_of(box_prog, "copy", VCall, 0)
    put_call = stmt_of(box_prog, "copy", VCall, 1)
    get, put = box_prog.methods["Box.get"], box_prog.methods["Box.put"]
    assert repr(map_to_caller(get_call, it.make("this", ("f",)), get, it)) == "box.f"
    assert repr(map_to_caller(put_call, it.make("str"), put, it)) == "data"
    assert map_to_caller(put_call, ZERO, put, it) is ZERO
    assert map_to_caller(put_call, Hit(3), put, it) == Hit(3)
    with pytest.raises(InvalidSummary):
        map_to_caller(put_call, it.make("local"), put, it)


def test_handle_external_models():
    prog = program('method m(a, b) {\nL0:\n  x = call unknown(a, b);\n  return x;\n}')
    s = stmt_of(prog, "m", Call)
    it = Interner()
    assert [repr(f) for f in handle_external(s, it.make("x"), it)] == ["a", "b"]
    assert [repr(f) for f in handle_external(s, it.make("x", ("f",)), it)] == ["a.f", "b.f"]
    assert handle_external(s, it.make("a", ("f",)), it) == (it.make("a", ("f",)),)
    assert handle_external(s, it.make("x"), it, "opaque") == ()


def test_box_copy_summaries(box_prog):
    res = _solve(box_prog)
    assert res.reachable
    assert {f"{m}: {e} <- {{{', '.join(sorted(v))}}}" for (m, e), v in res.summary_table().items()} == {
        "Box.get: <ret> <- {this.f}",
        "Box.put: this.f <- {arg0}",
        "copy: <ret>.f <- {arg0.f}",
    }


def test_concat_cat_summary(concat_prog):
    res = _solve(concat_prog)
    assert res.summary_table() == {("cat", "<ret>"): frozenset({"arg0", "arg1"})}
    assert set(res.sources) == {stmt_of(concat_prog, "start", Call, 0).id}


def test_constant_instead_of_source_is_unreachable(data_dir):
    from taintflow.frontend import load_program

    assert not _solve(load_program(data_dir / "box_copy_const.ir")).reachable


CHAIN = "method m() {\nL0:\n  t = call getTainted();\n%s  call sink(t);\n  return;\n}"


def test_chain_of_unrelated_assigns_is_jumped():
    body = "".join(f'  u{i} = "c";\n' for i in range(10))
    prog = program(CHAIN % body)
    on, off = _solve(prog), _solve(prog, skip_identity=False)
    assert on.reachable and off.reachable
    assert off.edges_materialized - on.edges_materialized == 10
    # the skipped statements are recorded for the trace
    link = next(link for pe, link in on.links.items() if isinstance(pe.fact, Hit))
    assert len(link.skipped) == 10


def test_chain_stops_at_store_to_fact_base():
    prog = program(
        "type T { field f; }\nmethod m() {\nL0:\n  t = new T;\n  v = call getTainted();\n"
        '  t.f = v;\n  u = "a";\n  w = "b";\n  x = t.f;\n  call sink(x);\n  return;\n}'
    )
    res = _solve(prog)
    store = next(s for s in prog.methods["m"].statements() if s.defined() is None and hasattr(s, "field"))
    nodes = {pe.stmt for pe in res.links}
    assert store.id in nodes
    assert res.reachable


def test_recursion_terminates_with_summary():
    prog = program(
        """
        method r(a, n) {
        L0:
          if n goto L1 else L2;
        L1:
          b = call r(a, n);
          goto L3;
        L2:
          b = a;
          goto L3;
        L3:
          return b;
        }
        method main(n) {
        L0:
          t = call getTainted();
          x = call r(t, n);
          call sink(x);
          return;
        }
        """
    )
    res = _solve(prog)
    assert res.reachable
    assert res.summary_table()[("r", "<ret>")] == frozenset({"arg0"})


def test_unbalanced_return_reaches_callers():
    prog = program(
        """
        method leaf(p) {
        L0:
          call sink(p);
          return;
        }
        method top() {
        L0:
          t = call getTainted();
          call leaf(t);
          return;
        }
        """
    )
    res = _solve(prog)
    assert res.reachable
    assert res.visited_methods == {"leaf", "top"}


def test_budget_is_enforced(box_prog):
    with pytest.raises(BudgetExceeded):
        _solve(box_prog, budget=3)


def test_deterministic(box_prog):
    a, b = _solve(box_prog, record_events=True), _solve(box_prog, record_events=True)
    assert a.events == b.events
    assert [repr(pe) for pe in a.links] == [repr(pe) for pe in b.links]
    assert a.summary_table() == b.summary_table()


def test_bad_config():
    with pytest.raises(ValueError):
        SolverConfig(external_model="magic")
    with pytest.raises(ValueError):
        SolverConfig(budget=0)
