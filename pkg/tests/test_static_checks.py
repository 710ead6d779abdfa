"""Static pattern checks: reentrancy (external call followed by a reachable
storage write) and timestamp dependence (data and control flow)."""

from __future__ import annotations

from yulverify.static_checks import run_static_checks
from yulverify.yul.parse import parse_unit

from conftest import load_unit


def check(src: str):
    return run_static_checks(parse_unit(src, source_name="<inline>"))


# ---------------------------------------------------------------------------
# Staked-voting pair
# ---------------------------------------------------------------------------


def test_buggy_voting_has_exactly_one_reentrancy_finding():
    findings = run_static_checks(load_unit("voting_buggy"))
    assert len(findings) == 1
    (f,) = findings
    assert f.pattern == "reentrancy"
    assert f.fn == "vote"
    # The finding is anchored at the token-pull call site...
    assert (f.span.line, f.span.col) == (25, 15)
    assert "external call to transferFrom" in f.message
    # ...and names the first storage write reachable after it.
    assert "map_set" in f.message
    assert f.related is not None and f.related.line == 27
    assert f.chain == ("vote", "vote")


def test_fixed_voting_is_clean():
    assert run_static_checks(load_unit("voting_fixed")) == []


# ---------------------------------------------------------------------------
# Timestamp pair
# ---------------------------------------------------------------------------


def test_buggy_settlement_has_data_and_control_findings():
    findings = run_static_checks(load_unit("timestamp_buggy"))
    assert [f.pattern for f in findings] == ["timestamp", "timestamp"]
    assert all(f.fn == "settle" for f in findings)
    data, control = findings
    assert data.message == "value written to storage by sstore derives from the block timestamp"
    assert (data.span.line, data.span.col) == (13, 5)
    assert control.message == "storage write (sstore) is guarded by a timestamp-dependent branch"
    assert (control.span.line, control.span.col) == (15, 9)


def test_fixed_settlement_is_clean():
    assert run_static_checks(load_unit("timestamp_fixed")) == []


# ---------------------------------------------------------------------------
# The checks run only where requested
# ---------------------------------------------------------------------------


def test_unchecked_functions_are_not_analyzed():
    assert check("function f() -> r { r := token(1) sstore(0x00, r) }") == []


def test_checks_are_scoped_to_the_annotated_function():
    findings = check(
        """
// @check reentrancy
function f() { let ok := token(1) sstore(0x00, 1) }
function g() { let ok := token(1) sstore(0x01, 1) }
"""
    )
    assert [f.fn for f in findings] == ["f"]


# ---------------------------------------------------------------------------
# Reentrancy shapes
# ---------------------------------------------------------------------------


def test_write_through_internal_helper_is_reported_with_chain():
    findings = check(
        """
// @check reentrancy
function f() { let ok := token(1) _h() }
function _h() { sstore(0x00, 1) }
"""
    )
    assert len(findings) == 1
    (f,) = findings
    assert f.chain == ("f", "_h")
    assert "sstore" in f.message


def test_effects_before_interaction_is_accepted():
    assert (
        check(
            """
// @check reentrancy
function f() { sstore(0x00, 1) let ok := token(1) }
"""
        )
        == []
    )


def test_raw_call_opcode_counts_as_external():
    findings = check(
        """
// @check reentrancy
function f(g) { let ok := call(g, 0, 0, 0, 0, 0, 0) sstore(0x00, 1) }
"""
    )
    assert len(findings) == 1
    assert "external call to call" in findings[0].message


def test_one_finding_per_call_site():
    findings = check(
        """
// @check reentrancy
function f() {
    let ok := token(1)
    sstore(0x00, 1)
    sstore(0x01, 2)
    sstore(0x02, 3)
}
"""
    )
    # Three writes follow the call, but the site is reported once, with the
    # first witnessing write.
    assert len(findings) == 1
    assert "line 5" in findings[0].message


# ---------------------------------------------------------------------------
# Timestamp shapes
# ---------------------------------------------------------------------------


def test_timestamp_reaching_return_value():
    findings = check(
        """
// @check timestamp
function f() -> r { r := timestamp() }
"""
    )
    assert len(findings) == 1
    assert findings[0].message == "returned value derives from the block timestamp"


def test_unused_timestamp_read_is_clean():
    assert (
        check(
            """
// @check timestamp
function f(x) -> r { let t := timestamp() r := x }
"""
        )
        == []
    )


def test_timestamp_taint_flows_through_arithmetic():
    findings = check(
        """
// @check timestamp
function f() { let t := add(timestamp(), 1) sstore(0x00, mul(t, 2)) }
"""
    )
    assert len(findings) == 1
    assert "derives from the block timestamp" in findings[0].message


def test_findings_sorted_by_location():
    findings = run_static_checks(load_unit("timestamp_buggy"))
    lines = [(f.span.line, f.span.col) for f in findings]
    assert lines == sorted(lines)
