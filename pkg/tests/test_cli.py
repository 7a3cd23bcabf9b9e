import json
import subprocess
import sys

import pytest

from taintflow import __version__
from taintflow.cli import main

from conftest import DATA

BOX = str(DATA / "box_copy.ir")
SPEC = str(DATA / "default_spec.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_box_copy_reports_one_finding(capsys):
    code, out, _ = run(capsys, "analyze", BOX, "--spec", SPEC)
    assert code == 1
    (finding,) = json.loads(out)
    assert finding["sink_stmt"] == 14 and finding["source_stmt"] == 9


def test_clean_program_exits_zero(capsys):
    code, out, _ = run(capsys, "analyze", str(DATA / "box_copy_const.ir"), "--spec", SPEC)
    assert code == 0 and json.loads(out) == []


def test_missing_spec_exits_two(capsys):
    code, out, err = run(capsys, "analyze", BOX, "--spec", str(DATA / "missing.json"))
    assert code == 2 and out == "" and "cannot read spec" in err


def test_missing_input_exits_two(capsys):
    code, _, err = run(capsys, "analyze", str(DATA / "missing.ir"))
    assert code == 2 and "missing.ir" in err


def test_parse_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.ir"
    bad.write_text("method m() {\nL0:\n  goto L7;\n}\n")
    code, _, err = run(capsys, "analyze", str(bad))
    assert code == 2 and "undefined label" in err


def test_usage_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", BOX, "--k", "0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert capsys.readouterr().out.strip() == f"taintflow {__version__} (default k=5)"


def test_dumps_go_to_stderr(capsys):
    code, out, err = run(capsys, "analyze", BOX, "--dump-summaries", "--dump-callgraph")
    assert code == 1
    lines = err.splitlines()
    assert "copy: <ret>.f <- {arg0.f}" in lines
    assert "12 -> copy" in lines
    assert "copy" not in out.split('"trace"')[0]


def test_trace_flows(capsys):
    _, _, err = run(capsys, "analyze", str(DATA / "concat.ir"), "--trace-flows")
    flows = [line for line in err.splitlines() if line.startswith("flow ")]
    assert "flow 6 res binop -> {pre, suf}" in flows
    _, _, again = run(capsys, "analyze", str(DATA / "concat.ir"), "--trace-flows")
    assert again == err


def test_stdout_is_byte_identical_across_runs(capsys):
    first = run(capsys, "analyze", BOX, "--format", "text", "--jobs", "3")
    second = run(capsys, "analyze", BOX, "--format", "text")
    assert first == second


def test_no_skip_identity_same_report(capsys):
    on = run(capsys, "analyze", BOX)
    off = run(capsys, "analyze", BOX, "--no-skip-identity")
    assert on == off


def test_k_and_external_model_flags(capsys):
    code, _, _ = run(capsys, "analyze", str(DATA / "concat.ir"), "--k", "1", "--external-model", "opaque")
    assert code == 1


def test_budget_exhaustion_exits_two(capsys):
    code, _, err = run(capsys, "analyze", BOX, "--budget", "2")
    assert code == 2 and "budget" in err


def test_oracle_subcommand_matches_analyze(capsys):
    _, out, _ = run(capsys, "analyze", BOX)
    code, oracle_out, _ = run(capsys, "oracle", BOX)
    strip = lambda text: [{k: v for k, v in f.items() if k != "trace"} for f in json.loads(text)]
    assert code == 1 and strip(out) == strip(oracle_out)


def test_gen_and_check(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "--seed", "0")
    assert code == 0 and out == (DATA / "gen_seed0.ir").read_text()
    code, _, err = run(capsys, "gen", "--seed", "5", "--count", "3", "--out", str(tmp_path))
    assert code == 0 and sorted(p.name for p in tmp_path.iterdir()) == [
        "seed_0005.ir", "seed_0006.ir", "seed_0007.ir", "spec.json"
    ]
    code, out, err = run(capsys, "check", str(tmp_path / "seed_0005.ir"), "--print-ssa")
    assert code == 0 and err.startswith("ok:") and "method main()" in out
    code, _, _ = run(capsys, "analyze", str(tmp_path / "seed_0005.ir"), "--spec", str(tmp_path / "spec.json"))
    assert code in (0, 1)


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "taintflow.cli", "check", BOX], capture_output=True, text=True)
    assert proc.returncode == 0 and "4 methods" in proc.stderr
