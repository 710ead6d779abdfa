"""Command-line interface smoke tests, run as real subprocesses: exit codes,
delimited output, JSON reports, and rendered figures."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conftest import FIXTURES

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def cli(*argv, stdin: str | None = None):
    return subprocess.run(
        [sys.executable, "-m", "yulverify.cli", *argv],
        capture_output=True,
        text=True,
        input=stdin,
        timeout=120,
    )


def fx(name: str) -> str:
    return str(FIXTURES / f"{name}.yul")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_clean_unit_exits_zero(solver_available):
    r = cli("verify", fx("sum_squares"))
    assert r.returncode == 0, r.stderr
    assert "# result: ok" in r.stdout
    assert r.stdout.startswith("oid\tkind\tptype\tline\tstatus\ttime\tmodel")
    assert "# inferred lottery_reward:" in r.stdout


def test_verify_buggy_unit_exits_one(solver_available):
    r = cli("verify", fx("voting_buggy"), "--ecf", "transferFrom=pure")
    assert r.returncode == 1
    assert "# result: FAIL" in r.stdout
    assert "Refuted" in r.stdout
    assert "reentrancy" in r.stdout


def test_verify_unanswered_external_exits_two():
    r = cli("verify", fx("voting_fixed"))
    assert r.returncode == 2
    assert "transferFrom" in r.stderr
    assert "--ecf" in r.stderr  # the error names the flag that fixes it


def test_verify_writes_json_and_figure(tmp_path, solver_available):
    out = tmp_path / "report.json"
    r = cli("verify", fx("sum_squares"), "--json", str(out))
    assert r.returncode == 0
    doc = json.loads(out.read_text())
    assert doc["ok"] is True
    assert doc["source"].endswith("sum_squares.yul")
    fig = tmp_path / "report.verdicts.png"
    assert fig.exists()
    assert fig.read_bytes()[:8] == PNG_MAGIC
    assert f"# wrote {out}" in r.stdout
    assert f"# wrote {fig}" in r.stdout


def test_verify_no_plots_skips_figure(tmp_path, solver_available):
    out = tmp_path / "report.json"
    r = cli("verify", fx("sum_squares"), "--json", str(out), "--no-plots")
    assert r.returncode == 0
    assert out.exists()
    assert not (tmp_path / "report.verdicts.png").exists()


def test_verify_reads_stdin(solver_available):
    src = "// @post result = 1\nfunction f() -> r { r := 1 }\n"
    r = cli("verify", "-", stdin=src)
    assert r.returncode == 0
    assert "f:Post:1\tPost\tT1" in r.stdout


def test_parse_error_exits_two():
    r = cli("verify", "-", stdin="function f( {")
    assert r.returncode == 2
    assert "error" in r.stderr.lower()


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


def test_trace_prints_rows_and_loop_table():
    r = cli("trace", fx("sum_squares"), "--fn", "lottery_reward", "--args", "13")
    assert r.returncode == 0
    lines = r.stdout.splitlines()
    assert lines[0] == "args\tstatus\tresult\tsteps"
    assert lines[1].startswith("13\treturned\t13\t")
    assert "# loop lottery_reward:" in r.stdout
    assert "iter\tx\ty" in r.stdout
    assert "3\t13\t434" in r.stdout


def test_trace_json_and_figure(tmp_path):
    out = tmp_path / "trace.json"
    r = cli(
        "trace",
        fx("sum_squares"),
        "--fn",
        "lottery_reward",
        "--args",
        "13",
        "--args",
        "20",
        "--json",
        str(out),
    )
    assert r.returncode == 0
    doc = json.loads(out.read_text())
    assert doc["fn"] == "lottery_reward"
    assert [run["args"] for run in doc["runs"]] == [[13], [20]]
    assert doc["runs"][0]["traces"][0]["rows"][-1] == [3, [13, 434]]
    fig = tmp_path / "trace.traces.png"
    assert fig.exists() and fig.read_bytes()[:8] == PNG_MAGIC


def test_trace_with_stubs():
    r = cli(
        "trace",
        fx("voting_fixed"),
        "--fn",
        "vote",
        "--args",
        "3,50",
        "--stub",
        "transferFrom=1",
    )
    assert r.returncode == 0
    assert "3,50\treturned\t\t" in r.stdout


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------


def test_infer_prints_accepted_invariant(solver_available):
    r = cli("infer", fx("sum_squares"))
    assert r.returncode == 0
    assert "2 * (x^3) + 3 * (x^2) - 6 * y + x - 2310 = 0" in r.stdout


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def test_check_buggy_exits_one():
    r = cli("check", fx("voting_buggy"))
    assert r.returncode == 1
    assert "reentrancy" in r.stdout
    assert "transferFrom" in r.stdout


def test_check_fixed_exits_zero():
    r = cli("check", fx("voting_fixed"))
    assert r.returncode == 0


def test_check_timestamp_pair():
    buggy = cli("check", fx("timestamp_buggy"))
    assert buggy.returncode == 1
    assert buggy.stdout.count("timestamp") >= 2
    fixed = cli("check", fx("timestamp_fixed"))
    assert fixed.returncode == 0


# ---------------------------------------------------------------------------
# export-deferred
# ---------------------------------------------------------------------------


def test_export_deferred_writes_theorems(tmp_path, solver_available):
    out = tmp_path / "deferred"
    r = cli(
        "export-deferred",
        fx("voting_fixed"),
        "--ecf",
        "transferFrom=pure",
        "--out",
        str(out),
    )
    assert r.returncode == 0, r.stderr
    assert (out / "manifest.json").exists()
    assert (out / "axioms.sexp").exists()
    assert (out / "_rebalanceStakers:Post:1.sexp").exists()


def test_export_deferred_without_inference_fails_on_learn_loop(tmp_path):
    out = tmp_path / "deferred"
    r = cli(
        "export-deferred",
        fx("voting_fixed"),
        "--ecf",
        "transferFrom=pure",
        "--no-infer",
        "--out",
        str(out),
    )
    assert r.returncode == 2
    assert "no invariant" in r.stdout + r.stderr


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


def test_backends_lists_default(solver_available):
    r = cli("backends")
    assert r.returncode == 0
    assert "z3" in r.stdout
