"""End-to-end pipeline: inference installs invariants, whole-unit
verification aggregates verdicts/findings/errors, and trace collection
tolerates failing runs."""

from __future__ import annotations

from yulverify.annotations import Directive
from yulverify.pipeline import (
    PipelineConfig,
    collect_traces,
    generate_obligations,
    infer_unit,
    verify_unit,
)
from yulverify.yul.ast import For
from yulverify.yul.parse import parse_unit

from conftest import fixture_text, load_unit


def the_loop(unit, fn_name):
    fn = unit.function(fn_name)
    (loop,) = [s for s in fn.body.stmts if isinstance(s, For)]
    return loop


# ---------------------------------------------------------------------------
# Inference installs invariants on the unit
# ---------------------------------------------------------------------------


def test_infer_unit_installs_validated_invariant(solver_available):
    unit = load_unit("sum_squares")
    inferences = infer_unit(unit, PipelineConfig())
    (li,) = inferences
    assert li.fn == "lottery_reward"
    assert li.watched == ("x", "y")
    assert li.loop_id.startswith("lottery_reward:")
    assert li.rows == 91  # default run ladder, all returning
    assert [str(i) for i in li.accepted] == [
        "2 * (x^3) + 3 * (x^2) - 6 * y + x - 2310 = 0"
    ]
    installed = [i for i in the_loop(unit, "lottery_reward").specs if i.directive is Directive.INV]
    assert len(installed) == 1
    # With the invariant installed, obligation generation succeeds.
    obs, _, _, errors = generate_obligations(unit, PipelineConfig())
    assert errors == []
    assert sorted({o.kind for o in obs}) == ["Inv-Init", "Inv-Preserve", "Post"]


def test_infer_unit_without_learn_loops_is_empty():
    unit = parse_unit("function f(x) -> r { r := x }", source_name="plain")
    assert infer_unit(unit, PipelineConfig()) == []


def test_collect_traces_skips_failing_runs():
    # Runs with n >= 5 revert before reaching the loop; only smaller inputs
    # contribute trace rows.
    src = """
function f(n) -> x {
    if gt(n, 4) { revert(0, 0) }
    // @learn i x
    for { let i := 0 } lt(i, n) { i := add(i, 1) } { x := add(x, i) }
}
"""
    unit = parse_unit(src, source_name="guarded")
    fn = unit.function("f")
    grouped = collect_traces(unit, fn, PipelineConfig())
    (traces,) = grouped.values()
    # Default ladder holds four values <= 4 (2, 1, 0 and 4 never appears —
    # the surviving runs are exactly those with n in {2, 1, 0}).
    assert len(traces) == 3


# ---------------------------------------------------------------------------
# Whole-unit verification
# ---------------------------------------------------------------------------


def test_verify_unit_clean_fixture(solver_available):
    outcome = verify_unit(
        fixture_text("sum_squares"), PipelineConfig(), source_name="sum_squares.yul"
    )
    assert outcome.errors == []
    assert outcome.findings == []
    assert outcome.ok
    assert outcome.elapsed > 0
    assert all(v.status == "Verified" for v in outcome.verdicts.values())
    assert {o.kind for o in outcome.obligations} == {"Inv-Init", "Inv-Preserve", "Post"}
    assert outcome.deferred == []
    assert len(outcome.active) == len(outcome.obligations)


def test_verify_unit_reports_missing_invariant_when_inference_off(solver_available):
    outcome = verify_unit(
        fixture_text("sum_squares"),
        PipelineConfig(infer=False),
        source_name="sum_squares.yul",
    )
    assert not outcome.ok
    assert [fn for fn, _ in outcome.errors] == ["lottery_reward"]
    assert outcome.obligations == []


def test_verify_unit_buggy_voting(solver_available):
    outcome = verify_unit(
        fixture_text("voting_buggy"),
        PipelineConfig(ecf={"transferFrom": "pure"}),
        source_name="voting_buggy.yul",
    )
    assert not outcome.ok
    # One reentrancy finding, and the stake-accumulation postcondition is
    # refuted with a concrete witness.
    assert [f.pattern for f in outcome.findings] == ["reentrancy"]
    stakes = [
        o
        for o in outcome.obligations
        if o.fn == "vote" and o.kind == "Post" and "stakes" in o.text
    ]
    assert stakes
    statuses = {outcome.verdicts[o.oid].status for o in stakes}
    assert "Refuted" in statuses
    refuted = next(o for o in stakes if outcome.verdicts[o.oid].status == "Refuted")
    assert outcome.verdicts[refuted.oid].model  # concrete witness present


def test_verify_unit_fixed_voting(solver_available):
    outcome = verify_unit(
        fixture_text("voting_fixed"),
        PipelineConfig(ecf={"transferFrom": "pure"}),
        source_name="voting_fixed.yul",
    )
    assert outcome.findings == []
    assert outcome.errors == []
    assert all(v.status == "Verified" for v in outcome.verdicts.values())
    assert outcome.ok
    # Hand-proved obligations are exported, not solved.
    assert len(outcome.deferred) == 10
    assert all(o.oid not in outcome.verdicts for o in outcome.deferred)
