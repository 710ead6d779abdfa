"""SMT layer: deterministic script emission, model parsing, counterexample
validation, and solver-backed verdict classification."""

from __future__ import annotations

import pytest

from yulverify import terms as T
from yulverify.annotations import Span
from yulverify.errors import UnsupportedSort
from yulverify.smt.drive import (
    SolverConfig,
    available_backends,
    discharge,
    discharge_all,
    parse_model,
    validate_model,
)
from yulverify.smt.emit import obligation_logic, script_for
from yulverify.terms import ARR, ArrayVal, BOOL
from yulverify.wp import Obligation


def mk_ob(oid, hyps, goal, kind="Post", fn="f", ptype="T1"):
    return Obligation(
        oid=oid,
        kind=kind,
        fn=fn,
        span=Span(1, 1),
        text="",
        ptype=ptype,
        deferred=False,
        hyps=tuple(hyps),
        goal=goal,
    )


X = T.sym("x")
Y = T.sym("y")


# ---------------------------------------------------------------------------
# Script emission
# ---------------------------------------------------------------------------


def test_script_bytes_are_deterministic():
    ob = mk_ob("f:Post:1", [T.ge(X, T.num(0)), T.lt(Y, T.num(9))], T.lt(X, T.num(5)))
    assert script_for(ob) == script_for(ob)
    again = mk_ob("f:Post:1", [T.ge(X, T.num(0)), T.lt(Y, T.num(9))], T.lt(X, T.num(5)))
    assert script_for(ob) == script_for(again)


def test_script_shape_and_negated_goal():
    ob = mk_ob("f:Post:1", [T.ge(X, T.num(0))], T.lt(X, T.num(5)))
    lines = script_for(ob).strip().splitlines()
    assert lines[0] == "(set-option :produce-models true)"
    assert lines[1] == "(set-logic QF_AUFNIA)"
    assert lines[2] == "(declare-const x Int)"
    assert "(assert (>= x 0))" in lines
    assert "(assert (not (< x 5)))" in lines
    assert lines[-2] == "(check-sat)"
    assert lines[-1] == "(get-model)"


def test_declarations_are_sorted_and_typed():
    ob = mk_ob(
        "f:Post:1",
        [T.sym("zz", BOOL), T.ge(T.select(T.sym("arr", ARR), X), T.num(0))],
        T.eq(X, X),
    )
    text = script_for(ob)
    decls = [l for l in text.splitlines() if l.startswith("(declare-const")]
    assert decls == [
        "(declare-const arr (Array Int Int))",
        "(declare-const x Int)",
        "(declare-const zz Bool)",
    ]


def test_quantified_obligation_selects_full_logic():
    q = T.forall((("a", "Int"),), T.ge(T.sym("a"), T.sym("a")))
    ob = mk_ob("f:Meta:1", [q], T.eq(X, X), kind="Meta", ptype="T3")
    assert obligation_logic(ob) == "ALL"
    assert "(set-logic ALL)" in script_for(ob)


def test_uninterpreted_functions_are_declared():
    app = T.UApp("ext_token_ret", (X,), "Int")
    ob = mk_ob("f:Post:1", [T.ge(app, T.num(0))], T.eq(X, X))
    assert "(declare-fun ext_token_ret (Int) Int)" in script_for(ob)


def test_conflicting_sorts_rejected():
    ob = mk_ob("f:Post:1", [T.ge(T.sym("x"), T.num(0))], T.sym("x", BOOL))
    with pytest.raises(UnsupportedSort):
        script_for(ob)


# ---------------------------------------------------------------------------
# Model parsing
# ---------------------------------------------------------------------------


def test_parse_model_plain_constants():
    text = """
sat
(
  (define-fun x () Int 7)
  (define-fun neg () Int (- 5))
  (define-fun flag () Bool true)
)
"""
    values, functions = parse_model(text)
    assert values == {"x": 7, "neg": -5, "flag": True}
    assert functions == {}


def test_parse_model_const_array_and_stores():
    text = """
sat
(
  (define-fun m () (Array Int Int)
    (store ((as const (Array Int Int)) 3) 170 99))
)
"""
    values, _ = parse_model(text)
    arr = values["m"]
    assert isinstance(arr, ArrayVal)
    assert arr.get(170) == 99
    assert arr.get(1) == 3


def test_parse_model_function_definitions_kept_raw():
    text = """
sat
(
  (define-fun f ((a Int)) Int (+ a 1))
)
"""
    values, functions = parse_model(text)
    assert values == {}
    assert "f" in functions and "(+ a 1)" in functions["f"]


def test_parse_model_ignores_non_model_noise():
    values, functions = parse_model("unsat\n(error \"no model\")\n")
    assert values == {} and functions == {}


# ---------------------------------------------------------------------------
# Counterexample validation
# ---------------------------------------------------------------------------

REFUTABLE = mk_ob("f:Post:1", [T.ge(X, T.num(0))], T.lt(X, T.num(5)))


def test_validate_model_accepts_true_counterexample():
    assert validate_model(REFUTABLE, {"x": 7}) is True


def test_validate_model_rejects_hyp_violating_assignment():
    assert validate_model(REFUTABLE, {"x": -3}) is False


def test_validate_model_rejects_goal_satisfying_assignment():
    assert validate_model(REFUTABLE, {"x": 2}) is False


def test_validate_model_defaults_missing_symbols_to_zero():
    ob = mk_ob("f:Post:1", [], T.gt(X, T.num(0)))
    assert validate_model(ob, {}) is True  # x defaults to 0, goal 0 > 0 is false


def test_validate_model_skips_uninterpreted_functions():
    app = T.UApp("ext_token_ret", (X,), "Int")
    ob = mk_ob("f:Post:1", [T.ge(app, T.num(0))], T.lt(X, T.num(5)))
    assert validate_model(ob, {"x": 7}) is None


def test_validate_model_with_array_values():
    arr = T.sym("m", ARR)
    ob = mk_ob("f:Post:1", [], T.lt(T.select(arr, T.num(170)), T.num(10)))
    assert validate_model(ob, {"m": ArrayVal(0, {170: 99})}) is True


# ---------------------------------------------------------------------------
# Solver-backed discharge
# ---------------------------------------------------------------------------


def test_default_backend_is_listed(solver_available):
    names = available_backends()
    assert "z3" in names and "z3-alt" in names


def test_trivial_obligation_verifies(solver_available):
    ob = mk_ob("f:Post:1", [T.ge(X, T.num(3))], T.ge(X, T.num(0)))
    v = discharge(ob, SolverConfig())
    assert v.status == "Verified"
    assert v.oid == "f:Post:1"
    assert v.backend == "z3"
    assert v.wall_time > 0


def test_refutation_carries_validated_model(solver_available):
    v = discharge(REFUTABLE, SolverConfig())
    assert v.status == "Refuted"
    assert "x" in v.model
    x = v.model["x"]
    assert isinstance(x, int) and x >= 5
    assert v.model_valid is True


def test_hard_goal_times_out(solver_available):
    # No cube equals 114 mod sufficiently awkward arithmetic in the time
    # available: a nonlinear search the solver cannot finish in a millisecond
    # budget.
    a, b, c = T.sym("a"), T.sym("b"), T.sym("c")
    hard = mk_ob(
        "f:Post:1",
        [T.ge(a, T.num(0)), T.ge(b, T.num(0)), T.ge(c, T.num(0))],
        T.neg(
            T.eq(
                T.add(T.mul(a, a, a), T.mul(b, b, b), T.mul(c, c, c)),
                T.num(114),
            )
        ),
    )
    v = discharge(hard, SolverConfig(timeout=0.4))
    assert v.status in ("Timeout", "Unknown")
    assert v.wall_time < 30


def test_batch_matches_single_shot_verdicts(solver_available):
    obs = [
        mk_ob("f:Post:1", [T.ge(X, T.num(3))], T.ge(X, T.num(0))),
        mk_ob("f:Post:2", [T.ge(X, T.num(0))], T.lt(X, T.num(5))),
        mk_ob("f:Post:3", [], T.eq(T.add(X, Y), T.add(Y, X))),
        mk_ob("f:Post:4", [T.lt(X, T.num(0))], T.lt(X, T.num(5))),
    ]
    singles = [discharge(ob, SolverConfig()).status for ob in obs]
    batch = discharge_all(obs, SolverConfig(jobs=3))
    assert [v.oid for v in batch] == [ob.oid for ob in obs]
    assert [v.status for v in batch] == singles
    assert singles == ["Verified", "Refuted", "Verified", "Verified"]


def test_alternate_backend_agrees(solver_available):
    obs = [
        mk_ob("f:Post:1", [T.ge(X, T.num(3))], T.ge(X, T.num(0))),
        mk_ob("f:Post:2", [T.ge(X, T.num(0))], T.lt(X, T.num(5))),
    ]
    a = [v.status for v in discharge_all(obs, SolverConfig(name="z3"))]
    b = [v.status for v in discharge_all(obs, SolverConfig(name="z3-alt"))]
    assert a == b == ["Verified", "Refuted"]
