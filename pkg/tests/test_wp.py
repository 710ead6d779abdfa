"""Weakest-precondition obligation generation: splitting, labeling, loop
rules, deferral propagation, and determinism."""

from __future__ import annotations

import pytest

from yulverify.errors import MissingInvariant
from yulverify.pipeline import PipelineConfig, generate_obligations
from yulverify.translate import TranslateConfig, translate_unit
from yulverify.wp import function_obligations
from yulverify.yul.parse import parse_unit

from conftest import load_unit


def obligations_of(src: str, **cfg):
    unit = parse_unit(src, source_name="<inline>")
    vfuncs, _ = translate_unit(unit, TranslateConfig(**cfg))
    out = {}
    for name, vf in vfuncs.items():
        out[name] = function_obligations(vf)
    return out


BUMP = """
// @storage total : uint256
// @pre x < 1000
// @post total = old total + x
function bump(x) {
    sstore(0x00, add(sload(0x00), x))
}
"""


def test_single_post_obligation_with_substituted_state():
    (obs,) = obligations_of(BUMP).values()
    assert [o.oid for o in obs] == ["bump:Post:1"]
    ob = obs[0]
    assert ob.kind == "Post" and ob.fn == "bump" and ob.ptype == "T1"
    assert ob.text == "total = old total + x"
    assert not ob.deferred
    # The store is pushed through the assignment and `old` is resolved to the
    # entry value, leaving a tautological equality.
    assert str(ob.goal) == "(= (+ slot_0x00 loc_x) (+ slot_0x00 loc_x))"
    assert len(ob.hyps) == 8


def test_formula_property_combines_hyps_and_goal():
    (obs,) = obligations_of(BUMP).values()
    ob = obs[0]
    f = str(ob.formula)
    assert f.startswith("(=> (and ")
    assert str(ob.goal) in f


LOOP = """
function s(n) -> x {
    x := 0
    let i := 0
    // @inv x >= 0 && i <= n + 1
    for { } lt(i, n) { i := add(i, 1) } { x := add(x, i) }
}
"""


def test_conjunctive_invariant_splits_per_conjunct():
    obs = obligations_of(LOOP)["s"]
    assert [o.oid for o in obs] == [
        "s:Inv-Init:1",
        "s:Inv-Init:2",
        "s:Inv-Preserve:1",
        "s:Inv-Preserve:2",
    ]
    init_goals = [str(o.goal) for o in obs if o.kind == "Inv-Init"]
    # At entry x = 0 and i = 0, so initiation goals are fully concrete.
    assert init_goals == ["(>= 0 0)", "(<= 0 (+ loc_n 1))"]


def test_preservation_runs_over_havocked_loop_state():
    obs = obligations_of(LOOP)["s"]
    keep = [o for o in obs if o.kind == "Inv-Preserve"]
    for ob in keep:
        syms = " ".join(str(h) for h in ob.hyps) + " " + str(ob.goal)
        assert "@h1" in syms  # iteration state is arbitrary, not the entry state
    # The guard is available as a hypothesis while proving preservation.
    assert any("(< " in str(h) for ob in keep for h in ob.hyps)


def test_unannotated_loop_raises_missing_invariant():
    with pytest.raises(MissingInvariant):
        obligations_of("function f(n) { for { let i := 0 } lt(i, n) { i := add(i, 1) } { } }")


def test_learn_without_inference_raises_missing_invariant():
    unit = load_unit("sum_squares")
    vfuncs, _ = translate_unit(unit, TranslateConfig())
    with pytest.raises(MissingInvariant):
        function_obligations(vfuncs["lottery_reward"])


def test_generate_obligations_collects_missing_invariant_as_error():
    unit = load_unit("sum_squares")
    obs, _, _, errors = generate_obligations(unit, PipelineConfig(infer=False))
    assert obs == []
    assert len(errors) == 1
    fn, msg = errors[0]
    assert fn == "lottery_reward" and "no invariant" in msg


# ---------------------------------------------------------------------------
# Voting unit: frozen obligation census
# ---------------------------------------------------------------------------


def voting_obligations():
    unit = load_unit("voting_fixed")
    cfg = PipelineConfig(ecf={"transferFrom": "pure"}, infer=False)
    obs, _, _, errors = generate_obligations(unit, cfg)
    return obs, errors


def test_voting_census_is_stable():
    obs, errors = voting_obligations()
    # The learn-annotated lottery loop cannot be proved without inference.
    assert [fn for fn, _ in errors] == ["_lotteryReward"]
    from collections import Counter

    assert Counter((o.fn, o.kind) for o in obs) == Counter(
        {
            ("vote", "Post"): 4,
            ("vote", "Meta"): 4,
            ("vote", "Pre"): 4,
            ("vote", "Ecf"): 1,
            ("random", "Post"): 1,
            ("random", "Meta"): 1,
            ("_rebalanceStakers", "Post"): 4,
            ("_rebalanceStakers", "Pre"): 4,
        }
    )
    assert Counter(o.ptype for o in obs) == Counter({"T1": 13, "T3": 5, "T2": 4, "T6": 1})


def test_oids_are_unique_and_deterministic():
    obs1, _ = voting_obligations()
    obs2, _ = voting_obligations()
    oids = [o.oid for o in obs1]
    assert len(set(oids)) == len(oids)
    assert oids == [o.oid for o in obs2]


def test_deferral_follows_the_annotation():
    obs, _ = voting_obligations()
    deferred = {o.oid for o in obs if o.deferred}
    # Every obligation about the hand-proved rebalancing helper is deferred,
    # including its preconditions checked at the `vote` call site.
    assert {o for o in deferred if o.startswith("_rebalanceStakers")} == {
        o.oid for o in obs if o.fn == "_rebalanceStakers"
    }
    assert "vote:Pre:3" in deferred and "vote:Pre:4" in deferred
    assert "vote:Post:1" not in deferred


def test_quantified_detection_and_skolemization():
    obs, _ = voting_obligations()
    by_oid = {o.oid: o for o in obs}
    # The unit-level meta is universally quantified, so obligations carrying
    # it as a hypothesis count as quantified...
    assert by_oid["vote:Post:1"].quantified
    # ...while goals themselves are skolemized where the meta is asserted.
    meta_goal = str(by_oid["vote:Meta:1"].goal)
    assert "@sk" in meta_goal
    assert "forall" not in meta_goal
    # A plain unit has no quantifiers anywhere.
    (plain,) = obligations_of(BUMP).values()
    assert not any(o.quantified for o in plain)


def test_span_and_text_point_at_source_annotations():
    obs, _ = voting_obligations()
    stakes = [o for o in obs if o.fn == "vote" and "stakes" in o.text and o.kind == "Post"]
    assert stakes, "the stake-accumulation postcondition must be present"
    for ob in stakes:
        assert ob.span.line > 0
        assert "old stakes[msg.sender] + stake" in ob.text
