"""Deferred-obligation export: theorem files, the manifest, and binding
axioms that tie modular effect symbols to their bodies' state transformers."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from yulverify.pipeline import PipelineConfig, export_unit

from conftest import fixture_text


def balanced(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch == ";":
            pass
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


SMALL = """
// @storage total : uint256
// @coq @post total = old total + x
function outer(x) { _g(x) }
function _g(y) { sstore(0x00, add(sload(0x00), y)) }
"""


def test_theorem_files_named_by_obligation_id(tmp_path):
    manifest = export_unit(SMALL, tmp_path, PipelineConfig(infer=False), source_name="small")
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["axioms.sexp", "manifest.json", "outer:Post:1.sexp"]
    assert manifest["theorems"] == [
        {
            "id": "outer:Post:1",
            "file": "outer:Post:1.sexp",
            "function": "outer",
            "kind": "Post",
            "property_type": "T1",
            "source": "total = old total + x",
        }
    ]


def test_theorem_file_content(tmp_path):
    export_unit(SMALL, tmp_path, PipelineConfig(infer=False), source_name="small")
    text = (tmp_path / "outer:Post:1.sexp").read_text()
    assert text.startswith("; outer:Post:1: deferred Post obligation from outer\n")
    assert "; source: total = old total + x" in text
    assert "(theorem outer_Post_1" in text
    # Declarations are sorted and typed; the effect symbol is declared with
    # its full signature (arg, storage, and call-context inputs).
    assert "    (loc_x Int)" in text
    assert "(fx__g_slot_0x00 (Int Int Int Int Int) Int)" in text
    assert "(goal (= (fx__g_slot_0x00 loc_x slot_0x00 msg_sender msg_value timestamp) (+ slot_0x00 loc_x)))" in text
    body = "\n".join(l for l in text.splitlines() if not l.startswith(";"))
    assert balanced(body)


def test_binding_axiom_closes_the_effect_symbol(tmp_path):
    manifest = export_unit(SMALL, tmp_path, PipelineConfig(infer=False), source_name="small")
    assert manifest["axioms_file"] == "axioms.sexp"
    assert manifest["axioms"] == [
        {"function": "_g", "symbol": "fx__g_slot_0x00", "status": "bound"}
    ]
    ax = (tmp_path / "axioms.sexp").read_text()
    # Binder order matches the application order used at call sites.
    assert (
        "(forall ((loc_y Int) (slot_0x00 Int) (msg_sender Int) (msg_value Int) (timestamp Int))"
        in ax
    )
    assert "(= (fx__g_slot_0x00 loc_y slot_0x00 msg_sender msg_value timestamp) (+ slot_0x00 loc_y))" in ax


def test_manifest_round_trips_from_disk(tmp_path):
    returned = export_unit(SMALL, tmp_path, PipelineConfig(infer=False), source_name="small")
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == returned


def test_voting_export_census(tmp_path):
    manifest = export_unit(
        fixture_text("voting_fixed"),
        tmp_path,
        PipelineConfig(ecf={"transferFrom": "pure"}),
        source_name="voting_fixed.yul",
    )
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "_rebalanceStakers:Post:1.sexp",
        "_rebalanceStakers:Post:2.sexp",
        "_rebalanceStakers:Post:3.sexp",
        "_rebalanceStakers:Post:4.sexp",
        "_rebalanceStakers:Pre:1.sexp",
        "_rebalanceStakers:Pre:2.sexp",
        "_rebalanceStakers:Pre:3.sexp",
        "_rebalanceStakers:Pre:4.sexp",
        "axioms.sexp",
        "manifest.json",
        "vote:Pre:3.sexp",
        "vote:Pre:4.sexp",
    ]
    assert len(manifest["theorems"]) == 10
    assert "errors" not in manifest
    # Every hand-proved obligation names its origin.
    kinds = {t["kind"] for t in manifest["theorems"]}
    assert kinds == {"Post", "Pre"}


def test_voting_axioms_bind_recursion_and_omit_loops(tmp_path):
    manifest = export_unit(
        fixture_text("voting_fixed"),
        tmp_path,
        PipelineConfig(ecf={"transferFrom": "pure"}),
        source_name="voting_fixed.yul",
    )
    notes = manifest["axioms"]
    by_status = {}
    for n in notes:
        by_status.setdefault(n["status"], []).append(n)
    # The lottery loop has no closed-form transformer.
    assert {n["function"] for n in by_status["omitted"]} == {"_lotteryReward"}
    assert by_status["omitted"][0]["reason"] == "loop"
    bound = {n["symbol"] for n in by_status["bound"]}
    assert {
        "fx__rebalanceStakers_map_0x03",
        "fx__rebalanceStakers_map_0x04",
        "fx__rebalanceStakers_slot_0x01",
        "fx_random_slot_0x08",
        "fx_random_ret",
    } == bound
    # The rebalancing helper is recursive: its transformer is defined in
    # terms of its own effect symbols.
    ax = (tmp_path / "axioms.sexp").read_text()
    first = ax.split("(axiom fx__rebalanceStakers_map_0x03", 1)[1]
    assert "fx__rebalanceStakers_" in first[:1200]
    assert balanced("\n".join(l for l in ax.splitlines() if not l.startswith(";")))


def test_loop_bodies_are_reported_not_bound(tmp_path):
    src = """
// @storage total : uint256
// @coq @post total >= 0
function outer(n) { _loopy(n) }
function _loopy(n) {
    // @inv 1 = 1
    for { let i := 0 } lt(i, n) { i := add(i, 1) } { sstore(0x00, i) }
}
"""
    manifest = export_unit(src, tmp_path, PipelineConfig(infer=False), source_name="loopy")
    assert manifest["axioms_file"] is None
    assert manifest["axioms"] == [
        {"function": "_loopy", "status": "omitted", "reason": "loop"}
    ]


def test_export_without_deferred_obligations_is_empty(tmp_path):
    manifest = export_unit(
        "// @post result = 1\nfunction f() -> r { r := 1 }",
        tmp_path,
        PipelineConfig(infer=False),
        source_name="plain",
    )
    assert manifest == {"theorems": [], "axioms_file": None, "axioms": []}
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json"]


def test_missing_invariant_surfaces_in_manifest(tmp_path):
    manifest = export_unit(
        fixture_text("voting_fixed"),
        tmp_path,
        PipelineConfig(ecf={"transferFrom": "pure"}, infer=False),
        source_name="voting_fixed.yul",
    )
    assert manifest["errors"] == [
        "_lotteryReward: loop at line 46 has no invariant; annotate it with @inv or @learn"
    ]
