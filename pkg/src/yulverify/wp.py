"""Weakest-precondition computation and obligation splitting.

`wp` walks the verification IR backwards, carrying the pending postcondition
plus one continuation formula per exception channel.  Loops use the
invariant rule: establish the invariants on entry, then — over a havocked
iteration state — show each invariant is preserved by the body and that the
continuation follows when the guard fails.  Every goal position is wrapped in
a `Labeled` marker naming its obligation; `split` then distributes the
resulting formula over conjunction, implication, and universal quantification
(skolemizing binders) into independent sequents.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .annotations import Span
from .errors import MissingInvariant
from .terms import (
    BOOL,
    TRUE,
    App,
    BoolVal,
    Labeled,
    Quant,
    Sym,
    Term,
    conj,
    free_syms,
    implies,
    neg,
    num,
    eq,
    subst,
)
from .vir import (
    ObTag,
    VAssert,
    VAssign,
    VAssume,
    VHavoc,
    VIf,
    VMatch,
    VRaise,
    VResult,
    VSeq,
    VTry,
    VWhile,
    VirExpr,
    VirFunction,
    assigned_cells,
)


@dataclass(frozen=True)
class Obligation:
    """One proof sequent: hypotheses entail the goal."""

    oid: str
    kind: str
    fn: str
    span: Span
    text: str
    ptype: str
    deferred: bool
    hyps: tuple[Term, ...]
    goal: Term

    @property
    def formula(self) -> Term:
        return implies(conj(*self.hyps), self.goal) if self.hyps else self.goal

    @property
    def quantified(self) -> bool:
        def has_quant(t: Term) -> bool:
            if isinstance(t, Quant):
                return True
            kids = getattr(t, "args", None)
            if kids is None:
                kids = []
                for attr in ("cond", "then", "other", "body"):
                    k = getattr(t, attr, None)
                    if isinstance(k, Term):
                        kids.append(k)
            return any(has_quant(k) for k in kids)

        return any(has_quant(t) for t in (*self.hyps, self.goal))


class _WpState:
    def __init__(self) -> None:
        self.havocs = 0
        self.skolems = 0


def wp(e: VirExpr, q: Term, channels: dict[str, Term],
       st: Optional[_WpState] = None) -> Term:
    st = st or _WpState()

    if isinstance(e, VSeq):
        for item in reversed(e.items):
            q = wp(item, q, channels, st)
        return q
    if isinstance(e, VAssign):
        return subst(q, {e.cell: e.value})
    if isinstance(e, VHavoc):
        st.havocs += 1
        k = st.havocs
        mapping = {
            s.name: Sym(f"{s.name}@h{k}", s.sort)
            for s in free_syms(q) if s.name in e.cells
        }
        return subst(q, mapping)
    if isinstance(e, VAssume):
        return implies(e.prop, q)
    if isinstance(e, VAssert):
        return conj(Labeled(e.tag, e.prop), implies(e.prop, q))
    if isinstance(e, VIf):
        other = wp(e.other, q, channels, st) if e.other is not None else q
        return conj(implies(e.cond, wp(e.then, q, channels, st)),
                    implies(neg(e.cond), other))
    if isinstance(e, VMatch):
        parts = []
        misses = []
        for value, body in e.cases:
            hit = eq(e.scrutinee, num(value))
            parts.append(implies(hit, wp(body, q, channels, st)))
            misses.append(neg(hit))
        fallthrough = (wp(e.default, q, channels, st)
                       if e.default is not None else q)
        parts.append(implies(conj(*misses), fallthrough))
        return conj(*parts)
    if isinstance(e, VWhile):
        return _wp_while(e, q, channels, st)
    if isinstance(e, VRaise):
        try:
            return channels[e.channel]
        except KeyError:  # pragma: no cover
            raise RuntimeError(f"raise outside a handler for {e.channel!r}")
    if isinstance(e, VTry):
        inner = dict(channels)
        for name, handler in e.handlers:
            inner[name] = wp(handler, q, channels, st)
        return wp(e.body, q, inner, st)
    if isinstance(e, VResult):
        return q
    raise TypeError(f"unknown IR node {e!r}")  # pragma: no cover


def _wp_while(e: VWhile, q: Term, channels: dict[str, Term],
              st: _WpState) -> Term:
    if not e.invariants:
        raise MissingInvariant(
            f"loop at line {e.span.line} has no invariant; annotate it with "
            "@inv or @learn"
        )
    inv = conj(*[t for t, _ in e.invariants])
    init = conj(*[Labeled(replace(tag, kind="Inv-Init"), t)
                  for t, tag in e.invariants])
    keep = conj(*[Labeled(replace(tag, kind="Inv-Preserve"), t)
                  for t, tag in e.invariants])

    body_wp = wp(e.body, keep, channels, st)
    step = implies(conj(inv, e.cond), body_wp)
    exit_ = implies(conj(inv, neg(e.cond)), q)

    st.havocs += 1
    k = st.havocs
    mods = assigned_cells(e.body)
    arbitrary = conj(step, exit_)
    mapping = {
        s.name: Sym(f"{s.name}@h{k}", s.sort)
        for s in free_syms(arbitrary) if s.name in mods
    }
    return conj(init, subst(arbitrary, mapping))


def split(formula: Term, fn: str) -> list[Obligation]:
    """Distribute a WP formula into labeled sequents."""
    st = _WpState()
    found: list[tuple[ObTag, tuple[Term, ...], Term]] = []
    seen: set = set()

    def walk(g: Term, hyps: tuple[Term, ...], tag: Optional[ObTag]) -> None:
        if isinstance(g, Labeled):
            walk(g.body, hyps, g.tag)
            return
        if isinstance(g, BoolVal) and g.value:
            return
        if isinstance(g, App) and g.op == "and":
            for part in g.args:
                walk(part, hyps, tag)
            return
        if isinstance(g, App) and g.op == "=>":
            walk(g.args[1], hyps + (g.args[0],), tag)
            return
        if isinstance(g, Quant) and g.kind == "forall":
            st.skolems += 1
            mapping = {n: Sym(f"{n}@sk{st.skolems}", sort)
                       for n, sort in g.binders}
            walk(subst(g.body, mapping), hyps, tag)
            return
        if tag is None:
            tag = ObTag(kind="Goal", fn=fn, span=Span(0, 0), text="",
                        ptype="T1", deferred=False)
        key = (tag, hyps, g)
        if key not in seen:
            seen.add(key)
            found.append((tag, hyps, g))

    walk(formula, (), None)

    counters: dict[str, int] = {}
    out: list[Obligation] = []
    for tag, hyps, goal in found:
        n = counters.get(tag.kind, 0) + 1
        counters[tag.kind] = n
        out.append(Obligation(
            oid=f"{fn}:{tag.kind}:{n}",
            kind=tag.kind,
            fn=fn,
            span=tag.span,
            text=tag.text,
            ptype=tag.ptype,
            deferred=tag.deferred,
            hyps=hyps,
            goal=goal,
        ))
    return out


def function_obligations(vf: VirFunction) -> list[Obligation]:
    """All proof obligations of one translated function."""
    formula = wp(vf.body, TRUE, {})
    entry = {
        s.name: Sym(s.name[: -len("@old")], s.sort)
        for s in free_syms(formula) if s.name.endswith("@old")
    }
    formula = subst(formula, entry)
    return split(formula, vf.name)
