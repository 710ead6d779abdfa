"""Export of deferred obligations as standalone theorem files.

Deferred obligations are not sent to a solver; they are written as
S-expression theorem files for an external proof assistant, together with a
manifest and one axiom file.  The axiom file binds the uninterpreted effect
functions used at modular call sites (`fx_<fn>_<component>`) to the actual
state transformers of their loop-free bodies, obtained by forward symbolic
evaluation, so the exported theorems mean the same thing the in-line
verification meant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .. import terms as T
from ..terms import Sym, Term, _smt_sort, free_syms, render, uapps
from ..translate import (
    REVERTED_CELL,
    RET_CELL,
    SENDER_CELL,
    TIME_CELL,
    VALUE_CELL,
    UnitInfo,
)
from ..vir import (
    LEAVE,
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
)
from ..wp import Obligation


class _Unbindable(Exception):
    """The body contains a loop or an unconstrained effect; no closed-form
    state transformer exists."""


@dataclass
class _Flow:
    state: dict[str, Term]
    exits: list[tuple[Term, dict[str, Term]]]

    def get(self, cell: str, sort: str) -> Term:
        return self.state.get(cell, Sym(cell, sort))

    def ev(self, t: Term) -> Term:
        mapping = {
            s.name: self.state[s.name]
            for s in free_syms(t) if s.name in self.state
        }
        return T.subst(t, mapping)


def _forward(e: VirExpr, flow: _Flow, pc: Term) -> bool:
    """Symbolically execute; returns False when no path falls through."""
    if isinstance(e, VSeq):
        for item in e.items:
            if not _forward(item, flow, pc):
                return False
        return True
    if isinstance(e, VAssign):
        flow.state[e.cell] = flow.ev(e.value)
        return True
    if isinstance(e, (VAssume, VAssert, VResult)):
        return True
    if isinstance(e, VHavoc):
        raise _Unbindable("unconstrained effect")
    if isinstance(e, VWhile):
        raise _Unbindable("loop")
    if isinstance(e, VIf):
        cond = flow.ev(e.cond)
        then_flow = _Flow(dict(flow.state), flow.exits)
        then_live = _forward(e.then, then_flow, T.conj(pc, cond))
        else_flow = _Flow(dict(flow.state), flow.exits)
        else_live = True
        if e.other is not None:
            else_live = _forward(e.other, else_flow, T.conj(pc, T.neg(cond)))
        if then_live and else_live:
            flow.state = _merge(cond, then_flow.state, else_flow.state)
            return True
        if then_live:
            flow.state = then_flow.state
            return True
        if else_live:
            flow.state = else_flow.state
            return True
        return False
    if isinstance(e, VMatch):
        scrut = flow.ev(e.scrutinee)
        live_states: list[tuple[Term, dict[str, Term]]] = []
        misses: list[Term] = []
        for value, body in e.cases:
            hit = T.eq(scrut, T.num(value))
            bf = _Flow(dict(flow.state), flow.exits)
            if _forward(body, bf, T.conj(pc, hit)):
                live_states.append((hit, bf.state))
            misses.append(T.neg(hit))
        df = _Flow(dict(flow.state), flow.exits)
        default_live = True
        if e.default is not None:
            default_live = _forward(e.default, df, T.conj(pc, *misses))
        merged: Optional[dict[str, Term]] = df.state if default_live else None
        for hit, st in reversed(live_states):
            merged = st if merged is None else _merge(hit, st, merged)
        if merged is None:
            return False
        flow.state = merged
        return True
    if isinstance(e, VRaise):
        if e.channel == LEAVE:
            flow.exits.append((pc, dict(flow.state)))
            return False
        raise _Unbindable("loop exit outside a loop")
    if isinstance(e, VTry):
        # Only the function's own leave boundary appears in loop-free bodies.
        return _forward(e.body, flow, pc)
    raise TypeError(f"unknown IR node {e!r}")  # pragma: no cover


def _merge(cond: Term, a: dict[str, Term], b: dict[str, Term]) -> dict[str, Term]:
    out: dict[str, Term] = {}
    for cell in sorted(set(a) | set(b)):
        ta, tb = a.get(cell), b.get(cell)
        if ta is None:
            ta = Sym(cell, tb.sort)
        if tb is None:
            tb = Sym(cell, ta.sort)
        out[cell] = ta if ta == tb else T.ite(cond, ta, tb)
    return out


def _exit_state(vf: VirFunction) -> dict[str, Term]:
    body = vf.body
    assert isinstance(body, VTry)
    flow = _Flow({}, [])
    if _forward(body.body, flow, T.TRUE):
        raise _Unbindable("body fell through its leave boundary")
    if not flow.exits:
        raise _Unbindable("no exit path")
    (_, merged), *rest = list(reversed(flow.exits))
    for pc, st in rest:
        merged = _merge(pc, st, merged)
    entry = {}
    for cell_term in merged.values():
        for s in free_syms(cell_term):
            if s.name.endswith("@old"):
                entry[s.name] = Sym(s.name[: -len("@old")], s.sort)
    return {c: T.subst(t, entry) for c, t in merged.items()}


def _axioms_for(name: str, vfuncs: dict[str, VirFunction],
                info: UnitInfo) -> tuple[list[str], list[dict]]:
    """Render binding axioms for one function's effect symbols."""
    fx = info.effects[name]
    vf = vfuncs[name]
    comps = sorted((fx.reads | fx.writes) & set(info.comp_sort))
    binders = [(p, "Int") for p in vf.params]
    binders += [(c, _smt_sort(info.comp_sort[c])) for c in comps]
    binders += [(SENDER_CELL, "Int"), (VALUE_CELL, "Int"), (TIME_CELL, "Int")]
    bind_s = " ".join(f"({n} {s})" for n, s in binders)
    applied = " ".join(n for n, _ in binders)

    try:
        exit_state = _exit_state(vf)
    except _Unbindable as why:
        return [], [{"function": name, "status": "omitted",
                     "reason": str(why)}]

    lines: list[str] = []
    notes: list[dict] = []

    def emit(symbol: str, term: Term) -> None:
        lines.append(
            f"(axiom {symbol}\n  (forall ({bind_s})\n"
            f"    (= ({symbol} {applied}) {render(term)})))"
        )
        notes.append({"function": name, "symbol": symbol, "status": "bound"})

    for c in sorted(fx.writes & set(info.comp_sort)):
        emit(f"fx_{name}_{c}",
             exit_state.get(c, Sym(c, info.comp_sort[c])))
    if vf.has_result:
        emit(f"fx_{name}_ret", exit_state.get(RET_CELL, T.ZERO))
    if fx.can_revert:
        emit(f"fx_{name}_aborts",
             exit_state.get(REVERTED_CELL, T.FALSE))
    return lines, notes


def _theorem_text(ob: Obligation) -> str:
    consts: dict[str, str] = {}
    funs: dict[str, tuple[tuple[str, ...], str]] = {}
    for t in (*ob.hyps, ob.goal):
        for s in free_syms(t):
            consts[s.name] = s.sort
        for fname, arg_sorts, ret_sort in uapps(t):
            funs[fname] = (arg_sorts, ret_sort)
    lines = [f"; {ob.oid}: deferred {ob.kind} obligation from {ob.fn}"]
    if ob.text:
        lines.append(f"; source: {ob.text}")
    lines.append(f"(theorem {_slug(ob.oid)}")
    lines.append("  (consts")
    for name in sorted(consts):
        lines.append(f"    ({name} {_smt_sort(consts[name])})")
    lines.append("  )")
    lines.append("  (funs")
    for name in sorted(funs):
        arg_sorts, ret_sort = funs[name]
        args = " ".join(_smt_sort(s) for s in arg_sorts)
        lines.append(f"    ({name} ({args}) {_smt_sort(ret_sort)})")
    lines.append("  )")
    lines.append("  (hyps")
    for h in ob.hyps:
        lines.append(f"    {render(h)}")
    lines.append("  )")
    lines.append(f"  (goal {render(ob.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _slug(oid: str) -> str:
    return oid.replace(":", "_").replace("/", "_")


def export_deferred(obligations: list[Obligation],
                    vfuncs: dict[str, VirFunction], info: UnitInfo,
                    out_dir) -> dict:
    """Write theorem files plus binding axioms; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    deferred = [ob for ob in obligations if ob.deferred]

    theorems = []
    needed_fx: set[str] = set()
    for ob in deferred:
        fname = f"{ob.oid}.sexp"
        (out / fname).write_text(_theorem_text(ob))
        theorems.append({
            "id": ob.oid,
            "file": fname,
            "function": ob.fn,
            "kind": ob.kind,
            "property_type": ob.ptype,
            "source": ob.text,
        })
        for t in (*ob.hyps, ob.goal):
            for uf_name, _, _ in uapps(t):
                if uf_name.startswith("fx_"):
                    needed_fx.add(uf_name)

    # Close over functions referenced by the axioms themselves.
    def owner(uf_name: str) -> Optional[str]:
        body = uf_name[len("fx_"):]
        for fn_name in vfuncs:
            if body == fn_name or body.startswith(fn_name + "_"):
                return fn_name
        return None

    axiom_lines: list[str] = []
    axiom_notes: list[dict] = []
    done: set[str] = set()
    work = sorted({o for o in map(owner, needed_fx) if o is not None})
    while work:
        fn_name = work.pop(0)
        if fn_name in done:
            continue
        done.add(fn_name)
        lines, notes = _axioms_for(fn_name, vfuncs, info)
        axiom_lines.extend(lines)
        axiom_notes.extend(notes)
        more: set[str] = set()
        for line in lines:
            for tok in line.replace("(", " ").replace(")", " ").split():
                if tok.startswith("fx_"):
                    o = owner(tok)
                    if o is not None and o not in done:
                        more.add(o)
        work.extend(sorted(more))

    axioms_file = None
    if axiom_lines:
        axioms_file = "axioms.sexp"
        header = ("; Binding axioms: each modular effect symbol equals the\n"
                  "; state transformer of its loop-free body.\n")
        (out / axioms_file).write_text(header + "\n\n".join(axiom_lines) + "\n")

    manifest = {
        "theorems": theorems,
        "axioms_file": axioms_file,
        "axioms": axiom_notes,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
