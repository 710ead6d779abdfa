"""Concrete interpreter: loop traces, external stubs, revert rollback, and
form evaluation against recorded entry state."""

from __future__ import annotations

import pytest

from yulverify.annotations import Directive, parse_form
from yulverify.errors import CalleeUnknown, OutOfFuel, ParseError
from yulverify.evm import EvmState, Message
from yulverify.interp import (
    AssertFailed,
    FormEnv,
    collect_loop_traces,
    eval_form,
    run_function,
)
from yulverify.yul import lower_spec_accessors
from yulverify.yul.parse import parse_unit

from conftest import load_unit


def inline(src: str):
    return parse_unit(src, source_name="<inline>")


# ---------------------------------------------------------------------------
# Sum-of-squares loop: frozen trace oracle
# ---------------------------------------------------------------------------

# The loop starts at x = 10, y = 0 and each iteration does x += 1 then
# y += x².  For n = 13 the loop body runs three times, so at successive
# loop-head arrivals (including the initial one) the watched pair is:
SUM_SQUARES_ROWS_13 = [
    (0, [10, 0]),
    (1, [11, 121]),
    (2, [12, 265]),
    (3, [13, 434]),
]


def recompute_sum_squares(n: int) -> list[tuple[int, list[int]]]:
    rows, x, y, i = [], 10, 0, 0
    rows.append((i, [x, y]))
    while x < n:
        x += 1
        y += x * x
        i += 1
        rows.append((i, [x, y]))
    return rows


def test_sum_squares_run_13():
    out = run_function(load_unit("sum_squares"), "lottery_reward", [13])
    assert out.status == "returned"
    assert not out.reverted
    assert out.result == 13
    assert out.state.storage.load(0) == 434  # 11² + 12² + 13²


def test_sum_squares_trace_rows_frozen():
    out = run_function(load_unit("sum_squares"), "lottery_reward", [13])
    assert len(out.traces) == 1
    tr = out.traces[0]
    assert tr.watched == ("x", "y")
    assert tr.rows == SUM_SQUARES_ROWS_13
    assert tr.rows == recompute_sum_squares(13)


def test_sum_squares_loop_id_names_function_and_position():
    out = run_function(load_unit("sum_squares"), "lottery_reward", [13])
    fn_name, line, col = out.traces[0].loop_id.split(":")
    assert fn_name == "lottery_reward"
    assert int(line) > 0 and int(col) > 0


@pytest.mark.parametrize("n", [0, 13, 20, 37])
def test_sum_squares_rows_match_recomputation(n):
    out = run_function(load_unit("sum_squares"), "lottery_reward", [n])
    assert out.traces[0].rows == recompute_sum_squares(n)


def test_collect_loop_traces_groups_by_loop():
    grouped = collect_loop_traces(load_unit("sum_squares"), "lottery_reward", [[13], [20]])
    assert len(grouped) == 1
    (traces,) = grouped.values()
    assert len(traces) == 2
    assert traces[0].rows == SUM_SQUARES_ROWS_13
    # 11² + … + 20² = 2485
    assert traces[1].rows[-1] == (10, [20, 2485])


def test_runs_are_deterministic():
    unit = load_unit("sum_squares")
    a = run_function(unit, "lottery_reward", [37])
    b = run_function(unit, "lottery_reward", [37])
    assert a.result == b.result
    assert a.traces[0].rows == b.traces[0].rows
    assert a.steps == b.steps > 0


# ---------------------------------------------------------------------------
# Voting unit: external stubs, storage effects, revert rollback
# ---------------------------------------------------------------------------

SENDER = 0xAA


def fresh_vote_state() -> EvmState:
    st = EvmState(message=Message(sender=SENDER, value=0, recipient=0x1))
    st.storage.scalars[8] = 7  # seed
    return st


def test_vote_happy_path_effects():
    unit = load_unit("voting_fixed")
    calls: list[tuple[int, ...]] = []

    def transfer_from(state, args):
        calls.append(tuple(args))
        return 1

    out = run_function(
        unit, "vote", [3, 50], state=fresh_vote_state(), externals={"transferFrom": transfer_from}
    )
    assert out.status == "returned"
    storage = out.state.storage
    assert storage.map_get(5, SENDER) == 1  # voted flag set
    assert storage.map_get(6, SENDER) == 50  # stake recorded
    assert storage.arr_len(0) == 1 and storage.arr_get(0, 0) == 50
    assert calls == [(SENDER, 50)]  # token pulled once, from the caller


def test_vote_twice_reverts_and_rolls_back():
    unit = load_unit("voting_fixed")
    first = run_function(
        unit, "vote", [3, 50], state=fresh_vote_state(), externals={"transferFrom": 1}
    )
    assert first.status == "returned"
    second = run_function(
        unit, "vote", [3, 9], state=first.state, externals={"transferFrom": 1}
    )
    assert second.status == "reverted" and second.reverted
    # Rollback: nothing the second call wrote survives.
    assert second.state.storage == first.state.storage


def test_failed_token_pull_reverts_and_rolls_back():
    unit = load_unit("voting_fixed")
    entry = fresh_vote_state()
    out = run_function(unit, "vote", [3, 9], state=entry, externals={"transferFrom": 0})
    assert out.status == "reverted"
    assert out.state.storage == entry.storage


def test_missing_external_raises():
    unit = load_unit("voting_fixed")
    with pytest.raises(CalleeUnknown):
        run_function(unit, "vote", [3, 9], state=fresh_vote_state())


def test_constant_stub_shorthand():
    u = inline("function m() -> r { r := foo(1) }")
    assert run_function(u, "m", [], externals={"foo": 42}).result == 42


# ---------------------------------------------------------------------------
# Language semantics
# ---------------------------------------------------------------------------


def test_wrap_mode_wraps_and_default_does_not():
    u = inline("function g(a) -> r { r := add(a, 1) }")
    assert run_function(u, "g", [2**64 - 1]).result == 2**64
    assert run_function(u, "g", [2**64 - 1], wrap_bits=64).result == 0


def test_switch_cases_and_default():
    u = inline(
        "function sw(x) -> r {"
        " switch x case 1 { r := 10 } case 2 { r := 20 } default { r := 99 } }"
    )
    assert run_function(u, "sw", [1]).result == 10
    assert run_function(u, "sw", [2]).result == 20
    assert run_function(u, "sw", [5]).result == 99


def test_break_exits_loop():
    u = inline(
        "function b() -> r {"
        " for { let i := 0 } lt(i, 10) { i := add(i, 1) } {"
        "   if eq(i, 3) { break } r := add(r, 1) } }"
    )
    assert run_function(u, "b", []).result == 3


def test_leave_returns_current_result():
    u = inline("function l(x) -> r { r := 7 if x { leave } r := 9 }")
    assert run_function(u, "l", [1]).result == 7
    assert run_function(u, "l", [0]).result == 9


def test_recursive_internal_call():
    u = inline(
        "function fact(n) -> r {"
        " r := 1 if gt(n, 1) { r := mul(n, fact(sub(n, 1))) } }"
    )
    assert run_function(u, "fact", [6]).result == 720


def test_in_body_assume_and_assert():
    u = inline(
        "function f(x) -> r {\n"
        " // @assume x < 5\n"
        " let y := add(x, 1)\n"
        " // @assert y > x\n"
        " r := y\n}"
    )
    assert run_function(u, "f", [3]).status == "returned"
    assert run_function(u, "f", [9]).status == "assumed_false"


def test_assert_failure_raises():
    u = inline("function k(x) -> r {\n // @assert x > 10\n r := x\n}")
    with pytest.raises(AssertFailed):
        run_function(u, "k", [1])


def test_trailing_annotation_rejected_at_parse():
    with pytest.raises(ParseError):
        inline("function f(x) -> r { r := x\n // @assert r > 0\n }")


def test_fuel_exhaustion():
    u = inline("function h() { for { } 1 { } { } }")
    with pytest.raises(OutOfFuel):
        run_function(u, "h", [], fuel=50)


def test_entry_state_is_not_mutated():
    u = inline("function s() { sstore(0x00, 5) }")
    st = EvmState()
    out = run_function(u, "s", [], state=st)
    assert st.storage.load(0) == 0
    assert out.entry.storage.load(0) == 0
    assert out.state.storage.load(0) == 5


# ---------------------------------------------------------------------------
# Concrete form evaluation
# ---------------------------------------------------------------------------

FORM_UNIT = parse_unit(
    "// @storage total : uint256\n"
    "// @storage bal : mapping(address => uint256)\n"
    "// @storage xs : uint256[]\n"
    "function touch() { sstore(0x00, 1) }\n",
    source_name="<forms>",
)


def form_env(**kw) -> FormEnv:
    st, entry = EvmState(), EvmState()
    defaults = dict(
        storage=st.storage,
        entry_storage=entry.storage,
        locals={},
        message=Message(sender=SENDER, value=3, recipient=1),
        status=None,
        result=None,
    )
    defaults.update(kw)
    return FormEnv(**defaults)


def lowered(text: str):
    return lower_spec_accessors(parse_form(text), FORM_UNIT.storage)


def test_eval_form_old_scalar_vs_current():
    ctx = form_env()
    ctx.entry_storage.store(0, 10)
    ctx.storage.store(0, 25)
    assert eval_form(lowered("total - old total"), ctx) == 15


def test_eval_form_old_map_lookup():
    ctx = form_env(locals={"a": 7})
    ctx.entry_storage.map_set(1, 7, 100)
    ctx.storage.map_set(1, 7, 140)
    assert eval_form(lowered("bal[a] = old bal[a] + 40"), ctx) is True


def test_eval_form_array_and_length():
    ctx = form_env()
    ctx.storage.arr_push(2, 11)
    ctx.storage.arr_push(2, 22)
    assert eval_form(lowered("xs.length"), ctx) == 2
    assert eval_form(lowered("xs[1]"), ctx) == 22
    assert eval_form(lowered("old xs.length"), ctx) == 0


def test_eval_form_status_atoms():
    assert eval_form(lowered("revert"), form_env(status="reverted")) is True
    assert eval_form(lowered("revert"), form_env(status="returned")) is False
    assert eval_form(lowered("return"), form_env(status="returned")) is True


def test_eval_form_result_and_message():
    ctx = form_env(status="returned", result=99)
    assert eval_form(lowered("result"), ctx) == 99
    assert eval_form(lowered("msg.sender"), ctx) == SENDER
    assert eval_form(lowered("msg.value"), ctx) == 3


def test_eval_form_div_truncates_toward_zero():
    ctx = form_env(locals={"a": -7, "b": 2})
    assert eval_form(lowered("a / b"), ctx) == -3
    assert eval_form(lowered("a / 0"), ctx) == 0


def test_eval_form_connectives_and_implication():
    ctx = form_env(locals={"x": 4})
    assert eval_form(lowered("x > 10 -> x = 0"), ctx) is True  # vacuous
    assert eval_form(lowered("x > 1 && !(x = 5) || x = 0"), ctx) is True


def test_eval_form_rejects_quantifiers():
    ctx = form_env(locals={})
    with pytest.raises(ValueError):
        eval_form(lowered("forall a : address, a >= 0"), ctx)
