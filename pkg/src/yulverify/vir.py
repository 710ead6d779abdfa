"""Exception-structured verification IR.

Function bodies translate into a small imperative IR over logical cells:
locals, the return cell, and machine-state components (per-slot storage,
memory, message, timestamp, gas, reverted flag).  Control flow is structured:
`break` and `leave` are raise/handle pairs on their own channels, and every
function body has the canonical shape

    try <body>; raise leave with leave -> <exit asserts>; result end

so that exit obligations are evaluated on every path (normal or revert).
Pure computation is carried as first-order terms; effectful operations are
explicit nodes produced by normalization during translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .annotations import Span
from .terms import Term

BREAK = "break"
LEAVE = "leave"


@dataclass(frozen=True)
class ObTag:
    """Identity of a proof goal: what kind, where from, how to report it."""

    kind: str  # Pre | Post | Assert | Inv-Init | Inv-Preserve | Meta | Overflow | Memory | Ecf
    fn: str
    span: Span
    text: str
    ptype: str  # T1..T6
    deferred: bool = False


class VirExpr:
    pass


@dataclass(frozen=True)
class VSeq(VirExpr):
    items: tuple[VirExpr, ...]


@dataclass(frozen=True)
class VAssign(VirExpr):
    """Assignment to a mutable cell (also used for `let` bindings)."""

    cell: str
    value: Term


@dataclass(frozen=True)
class VHavoc(VirExpr):
    cells: tuple[str, ...]
    note: str = ""


@dataclass(frozen=True)
class VAssume(VirExpr):
    prop: Term


@dataclass(frozen=True)
class VAssert(VirExpr):
    prop: Term
    tag: ObTag


@dataclass(frozen=True)
class VIf(VirExpr):
    cond: Term
    then: VirExpr
    other: Optional[VirExpr] = None


@dataclass(frozen=True)
class VMatch(VirExpr):
    scrutinee: Term
    cases: tuple[tuple[int, VirExpr], ...]
    default: Optional[VirExpr] = None


@dataclass(frozen=True)
class VWhile(VirExpr):
    cond: Term
    invariants: tuple[tuple[Term, ObTag], ...]
    body: VirExpr
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass(frozen=True)
class VRaise(VirExpr):
    channel: str


@dataclass(frozen=True)
class VTry(VirExpr):
    body: VirExpr
    handlers: tuple[tuple[str, VirExpr], ...]


@dataclass(frozen=True)
class VResult(VirExpr):
    """Marker for the function's produced value at the exit boundary."""

    value: Term


@dataclass
class VirFunction:
    name: str
    params: list[str]
    has_result: bool
    body: VirExpr  # canonical try/leave shape
    requires: list[Term] = field(default_factory=list)
    span: Span = field(default=Span(0, 0))


def vseq(*items: VirExpr) -> VirExpr:
    flat: list[VirExpr] = []
    for item in items:
        if isinstance(item, VSeq):
            flat.extend(item.items)
        elif item is not None:
            flat.append(item)
    if len(flat) == 1:
        return flat[0]
    return VSeq(tuple(flat))


def assigned_cells(e: VirExpr) -> set[str]:
    """Cells (transitively) assigned or havocked within an IR fragment."""
    out: set[str] = set()

    def walk(node: VirExpr) -> None:
        if isinstance(node, VSeq):
            for i in node.items:
                walk(i)
        elif isinstance(node, VAssign):
            out.add(node.cell)
        elif isinstance(node, VHavoc):
            out.update(node.cells)
        elif isinstance(node, VIf):
            walk(node.then)
            if node.other is not None:
                walk(node.other)
        elif isinstance(node, VMatch):
            for _, b in node.cases:
                walk(b)
            if node.default is not None:
                walk(node.default)
        elif isinstance(node, VWhile):
            walk(node.body)
        elif isinstance(node, VTry):
            walk(node.body)
            for _, h in node.handlers:
                walk(h)

    walk(e)
    return out


def pretty(e: VirExpr, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(e, VSeq):
        return "\n".join(pretty(i, indent) for i in e.items)
    if isinstance(e, VAssign):
        return f"{pad}{e.cell} := {e.value}"
    if isinstance(e, VHavoc):
        return f"{pad}havoc {', '.join(e.cells)}" + (f"  ; {e.note}" if e.note else "")
    if isinstance(e, VAssume):
        return f"{pad}assume {e.prop}"
    if isinstance(e, VAssert):
        return f"{pad}assert[{e.tag.kind}] {e.prop}"
    if isinstance(e, VIf):
        out = f"{pad}if {e.cond} then\n{pretty(e.then, indent + 1)}"
        if e.other is not None:
            out += f"\n{pad}else\n{pretty(e.other, indent + 1)}"
        return out + f"\n{pad}end"
    if isinstance(e, VMatch):
        out = [f"{pad}match {e.scrutinee} with"]
        for value, body in e.cases:
            out.append(f"{pad}| {value} ->\n{pretty(body, indent + 1)}")
        if e.default is not None:
            out.append(f"{pad}| _ ->\n{pretty(e.default, indent + 1)}")
        return "\n".join(out + [f"{pad}end"])
    if isinstance(e, VWhile):
        invs = "".join(f"\n{pad}  invariant {t}" for t, _ in e.invariants)
        return f"{pad}while {e.cond} do{invs}\n{pretty(e.body, indent + 1)}\n{pad}done"
    if isinstance(e, VRaise):
        return f"{pad}raise {e.channel}"
    if isinstance(e, VTry):
        out = f"{pad}try\n{pretty(e.body, indent + 1)}"
        for ch, h in e.handlers:
            out += f"\n{pad}with {ch} ->\n{pretty(h, indent + 1)}"
        return out + f"\n{pad}end"
    if isinstance(e, VResult):
        return f"{pad}result {e.value}"
    raise TypeError(f"unknown IR node {e!r}")  # pragma: no cover
