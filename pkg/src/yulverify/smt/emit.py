"""Deterministic SMT-LIB2 script emission for proof obligations.

The same obligation always renders to the same bytes: declarations are sorted
by name, hypotheses keep generation order, and the goal is asserted negated —
`unsat` therefore means the obligation is valid.  The script requests a model
so refutations come back with a witness; the trailing `(get-model)` after an
`unsat` answer produces a benign error line that the driver tolerates.
"""

from __future__ import annotations

from ..errors import UnsupportedSort
from ..terms import Term, _smt_sort, free_syms, neg, render, uapps
from ..wp import Obligation


def obligation_logic(ob: Obligation) -> str:
    return "ALL" if ob.quantified else "QF_AUFNIA"


def script_for(ob: Obligation) -> str:
    terms: list[Term] = [*ob.hyps, ob.goal]

    consts: dict[str, str] = {}
    for t in terms:
        for s in free_syms(t):
            prev = consts.get(s.name)
            if prev is not None and prev != s.sort:
                raise UnsupportedSort(
                    f"symbol {s.name} used at both {prev} and {s.sort}"
                )
            consts[s.name] = s.sort

    funs: dict[str, tuple[tuple[str, ...], str]] = {}
    for t in terms:
        for name, arg_sorts, ret_sort in uapps(t):
            prev = funs.get(name)
            if prev is not None and prev != (arg_sorts, ret_sort):
                raise UnsupportedSort(f"conflicting signatures for {name}")
            funs[name] = (arg_sorts, ret_sort)

    lines = [
        "(set-option :produce-models true)",
        f"(set-logic {obligation_logic(ob)})",
    ]
    for name in sorted(consts):
        lines.append(f"(declare-const {name} {_smt_sort(consts[name])})")
    for name in sorted(funs):
        arg_sorts, ret_sort = funs[name]
        args = " ".join(_smt_sort(s) for s in arg_sorts)
        lines.append(f"(declare-fun {name} ({args}) {_smt_sort(ret_sort)})")
    for h in ob.hyps:
        lines.append(f"(assert {render(h)})")
    lines.append(f"(assert {render(neg(ob.goal))})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


__all__ = ["script_for", "obligation_logic"]
