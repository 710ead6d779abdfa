"""Translation from contract functions into the verification IR.

Pure computation becomes first-order terms over logical cells; effectful
operations (storage writes, memory traffic, calls, revert) become explicit IR
nodes.  Calls are treated modularly: a call site asserts the callee's
requires, snapshots the state the callee depends on, applies the callee's
effects as uninterpreted functions of that snapshot, assumes the callee's
caller-visible ensures, and — when the callee can abort — branches into a
rollback-and-raise path.  External (out-of-unit) targets never abort the
caller; their state effect is governed by a declared effect answer
(pure = state frame, impure = storage havoc bracketed by the state meta).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import annotations as A
from . import terms as T
from .annotations import Directive, Pattern, Span, SpecItem, StatusKind, print_form
from .errors import (
    MissingEcfAnswer,
    NoLayout,
    UnsupportedConstruct,
    UnsupportedStmt,
)
from .terms import ARR, BOOL, INT, FALSE, TRUE, ZERO, Sym, Term, UApp
from .vir import (
    BREAK,
    LEAVE,
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
    vseq,
)
from .yul import (
    Assign,
    Block,
    Break,
    Call,
    Expr,
    ExprStmt,
    For,
    If,
    Leave,
    Let,
    Num,
    SpecStmt,
    StorageLayout,
    Switch,
    Var,
    YulFunc,
    YulUnit,
    lower_spec_accessors,
)
from .yul.parse import BUILTINS
from .yul.storage import DYNARRAY, MAPPING, SCALAR, StateVar

ADDRESS_BITS = 160

#: Opcodes translated to pure terms.
_PURE_OPS = frozenset(
    {"add", "sub", "mul", "div", "lt", "gt", "eq", "iszero", "and", "or",
     "caller", "timestamp"}
)

MEM_CELL = "mem"
MEMSIZE_CELL = "memsize"
GAS_CELL = "gas"
SENDER_CELL = "msg_sender"
VALUE_CELL = "msg_value"
TIME_CELL = "timestamp"
REVERTED_CELL = "reverted"
RET_CELL = "ret"

_MEM_COMPS = (MEM_CELL, MEMSIZE_CELL, GAS_CELL)


def local_cell(name: str) -> str:
    return f"loc_{name}"


def scalar_cell(v: StateVar) -> str:
    return f"slot_0x{v.slot:02x}"


def map_cell(v: StateVar) -> str:
    return f"map_0x{v.slot:02x}"


def arr_cell(v: StateVar) -> str:
    return f"arr_0x{v.slot:02x}"


def len_cell(v: StateVar) -> str:
    return f"len_0x{v.slot:02x}"


def storage_comps(layout: StorageLayout) -> dict[str, str]:
    """Ordered {cell name: sort} for every storage component of the layout."""
    out: dict[str, str] = {}
    for v in sorted(layout.vars.values(), key=lambda s: s.slot):
        if v.kind == SCALAR:
            out[scalar_cell(v)] = INT
        elif v.kind == MAPPING:
            out[map_cell(v)] = ARR
        else:
            out[arr_cell(v)] = ARR
            out[len_cell(v)] = INT
    return out


def comp_sorts(layout: StorageLayout) -> dict[str, str]:
    out = dict(storage_comps(layout))
    out[MEM_CELL] = ARR
    out[MEMSIZE_CELL] = INT
    out[GAS_CELL] = INT
    return out


@dataclass
class FnEffects:
    reads: set[str] = field(default_factory=set)
    writes: set[str] = field(default_factory=set)
    can_revert: bool = False
    has_external: bool = False
    internal_callees: set[str] = field(default_factory=set)


@dataclass
class UnitInfo:
    unit: YulUnit
    effects: dict[str, FnEffects]
    comp_sort: dict[str, str]

    @property
    def storage_cells(self) -> list[str]:
        return [c for c in self.comp_sort if c not in _MEM_COMPS]


@dataclass
class TranslateConfig:
    wrap_bits: Optional[int] = None
    ecf: dict[str, str] = field(default_factory=dict)  # name -> "pure"|"impure"

    @property
    def word_bits(self) -> int:
        return self.wrap_bits if self.wrap_bits else 256


def _slot_var(layout: StorageLayout, slot_expr: Expr, intrinsic: str) -> StateVar:
    if not isinstance(slot_expr, Num):
        raise UnsupportedConstruct(
            f"{intrinsic} requires a literal slot argument"
        )
    try:
        return layout.by_slot(slot_expr.value)
    except KeyError:
        raise NoLayout(
            f"no storage declaration for slot {slot_expr.value:#x}"
        ) from None


def analyze_unit(unit: YulUnit, config: TranslateConfig) -> UnitInfo:
    """Per-function read/write/abort effect summaries, closed over calls."""
    sorts = comp_sorts(unit.storage)
    all_storage = [c for c in sorts if c not in _MEM_COMPS]
    effects = {f.name: FnEffects() for f in unit.functions}
    missing_ecf: set[str] = set()

    def visit_call(fx: FnEffects, c: Call) -> None:
        layout = unit.storage
        name = c.callee
        if name in ("sload",):
            fx.reads.add(scalar_cell(_slot_var(layout, c.args[0], name)))
        elif name == "sstore":
            fx.writes.add(scalar_cell(_slot_var(layout, c.args[0], name)))
        elif name in ("map_get", "map2_get"):
            fx.reads.add(map_cell(_slot_var(layout, c.args[0], name)))
        elif name in ("map_set", "map2_set"):
            fx.writes.add(map_cell(_slot_var(layout, c.args[0], name)))
        elif name == "arr_get":
            fx.reads.add(arr_cell(_slot_var(layout, c.args[0], name)))
        elif name == "arr_len":
            fx.reads.add(len_cell(_slot_var(layout, c.args[0], name)))
        elif name == "arr_set":
            fx.writes.add(arr_cell(_slot_var(layout, c.args[0], name)))
        elif name == "arr_push":
            v = _slot_var(layout, c.args[0], name)
            fx.writes.update({arr_cell(v), len_cell(v)})
            fx.reads.add(len_cell(v))
        elif name == "mload":
            fx.reads.update(_MEM_COMPS)
            fx.writes.update({MEMSIZE_CELL, GAS_CELL})
        elif name == "mstore":
            fx.reads.update(_MEM_COMPS)
            fx.writes.update(_MEM_COMPS)
        elif name == "revert":
            fx.can_revert = True
        elif name in _PURE_OPS:
            pass
        elif unit.defines(name):
            fx.internal_callees.add(name)
        else:
            fx.has_external = True
            answer = config.ecf.get(name)
            if answer is None:
                missing_ecf.add(name)
            elif answer == "impure":
                fx.writes.update(all_storage)
        for a in c.args:
            if isinstance(a, Call):
                visit_call(fx, a)

    def visit_expr(fx: FnEffects, e: Expr) -> None:
        if isinstance(e, Call):
            visit_call(fx, e)

    def visit_block(fx: FnEffects, b: Block) -> None:
        for s in b.stmts:
            if isinstance(s, (Let, Assign)):
                visit_expr(fx, s.value)
            elif isinstance(s, ExprStmt):
                visit_expr(fx, s.expr)
            elif isinstance(s, If):
                visit_expr(fx, s.cond)
                visit_block(fx, s.body)
            elif isinstance(s, Switch):
                visit_expr(fx, s.scrutinee)
                for _, body in s.cases:
                    visit_block(fx, body)
                if s.default is not None:
                    visit_block(fx, s.default)
            elif isinstance(s, For):
                visit_block(fx, s.init)
                visit_expr(fx, s.cond)
                visit_block(fx, s.body)
                visit_block(fx, s.post)

    for f in unit.functions:
        visit_block(effects[f.name], f.body)
    if missing_ecf:
        raise MissingEcfAnswer(
            "no effect answer for external call target(s): "
            + ", ".join(sorted(missing_ecf))
        )

    changed = True
    while changed:
        changed = False
        for f in unit.functions:
            fx = effects[f.name]
            for callee in fx.internal_callees:
                cf = effects[callee]
                merged_r = fx.reads | cf.reads
                merged_w = fx.writes | cf.writes
                merged_rv = fx.can_revert or cf.can_revert
                merged_ext = fx.has_external or cf.has_external
                if (merged_r != fx.reads or merged_w != fx.writes
                        or merged_rv != fx.can_revert
                        or merged_ext != fx.has_external):
                    fx.reads, fx.writes = merged_r, merged_w
                    fx.can_revert, fx.has_external = merged_rv, merged_ext
                    changed = True

    return UnitInfo(unit=unit, effects=effects, comp_sort=sorts)


class _DropConjunct(Exception):
    """Raised while converting a contract conjunct that mentions callee-local
    state invisible to the caller; the conjunct is dropped."""


@dataclass
class FormCtx:
    """How identifiers, `old`, `result`, and status atoms denote terms."""

    lookup: dict[str, Term]
    layout: StorageLayout
    old_rename: Optional[dict[str, Term]] = None  # None -> `old` illegal here
    result: Optional[Term] = None
    status_revert: Optional[Term] = None  # term for "the call reverted"
    strict: bool = True  # unknown identifier: raise vs drop conjunct
    _binders: list[str] = field(default_factory=list)


def _as_word(t: Term) -> Term:
    return T.bool_word(t) if t.sort == BOOL else t


def _as_prop(t: Term) -> Term:
    return T.truthy(t) if t.sort == INT else t


def form_to_term(form: A.Form, ctx: FormCtx) -> Term:
    """Convert a storage-lowered annotation form into a proposition term."""
    return _as_prop(_cv(form, ctx))


def _cv(f: A.Form, ctx: FormCtx) -> Term:
    if isinstance(f, A.Lit):
        return T.num(f.value)
    if isinstance(f, A.Ident):
        if f.name in ctx._binders:
            return T.sym(f"q_{f.name}")
        if f.name == "msg.sender":
            return T.sym(SENDER_CELL)
        if f.name == "msg.value":
            return T.sym(VALUE_CELL)
        t = ctx.lookup.get(f.name)
        if t is None:
            if ctx.strict:
                raise A.UnboundIdentifier(f"unbound identifier '{f.name}'")
            raise _DropConjunct(f.name)
        return t
    if isinstance(f, A.SlotRef):
        v = ctx.layout.get(f.name)
        if f.kind == SCALAR:
            return T.sym(scalar_cell(v))
        if f.kind == MAPPING:
            return T.sym(map_cell(v), ARR)
        return T.sym(arr_cell(v), ARR)
    if isinstance(f, A.MapGet):
        # Two-key mappings read through an uninterpreted key pairing.
        if isinstance(f.base, A.MapGet) and isinstance(f.base.base, A.SlotRef) \
                and f.base.base.kind == MAPPING and f.base.base.depth == 2:
            cell = T.sym(map_cell(ctx.layout.get(f.base.base.name)), ARR)
            k1 = _as_word(_cv(f.base.key, ctx))
            k2 = _as_word(_cv(f.key, ctx))
            return T.select(cell, UApp("kpair", (k1, k2), INT))
        base = _cv(f.base, ctx)
        if base.sort != ARR:
            raise A.UnboundIdentifier("indexing into a non-indexed value")
        return T.select(base, _as_word(_cv(f.key, ctx)))
    if isinstance(f, A.Length):
        if isinstance(f.base, A.SlotRef) and f.base.kind == DYNARRAY:
            return T.sym(len_cell(ctx.layout.get(f.base.name)))
        raise A.UnboundIdentifier(".length on a non-array value")
    if isinstance(f, A.Old):
        if ctx.old_rename is None:
            raise A.OldOutsidePost("`old` is not meaningful here")
        inner = _cv(f.body, ctx)
        return T.subst(inner, ctx.old_rename)
    if isinstance(f, A.Result):
        if ctx.result is None:
            raise A.ResultOutsidePost("`result` is not meaningful here")
        return ctx.result
    if isinstance(f, A.Status):
        if ctx.status_revert is None:
            raise UnsupportedConstruct("exit-status atom outside an ensures")
        rev = ctx.status_revert
        return rev if f.kind == StatusKind.REVERT else T.neg(rev)
    if isinstance(f, A.Arith):
        a, b = _as_word(_cv(f.left, ctx)), _as_word(_cv(f.right, ctx))
        if f.op == "+":
            return T.add(a, b)
        if f.op == "-":
            return T.sub(a, b)
        if f.op == "*":
            return T.mul(a, b)
        if f.op == "/":
            return T.ite(T.eq(b, ZERO), ZERO, T.idiv(a, b))
        raise UnsupportedConstruct(f"operator {f.op!r}")
    if isinstance(f, A.Pow):
        base = _as_word(_cv(f.base, ctx))
        out: Term = T.num(1)
        for _ in range(f.exp):
            out = T.mul(out, base)
        return out
    if isinstance(f, A.Cmp):
        a, b = _as_word(_cv(f.left, ctx)), _as_word(_cv(f.right, ctx))
        if f.op == "=":
            return T.eq(a, b)
        if f.op == "!=":
            return T.neg(T.eq(a, b))
        if f.op == "<":
            return T.lt(a, b)
        if f.op == "<=":
            return T.le(a, b)
        if f.op == ">":
            return T.gt(a, b)
        return T.ge(a, b)
    if isinstance(f, A.Not):
        return T.neg(_as_prop(_cv(f.body, ctx)))
    if isinstance(f, A.And):
        return T.conj(_as_prop(_cv(f.left, ctx)), _as_prop(_cv(f.right, ctx)))
    if isinstance(f, A.Or):
        return T.disj(_as_prop(_cv(f.left, ctx)), _as_prop(_cv(f.right, ctx)))
    if isinstance(f, A.Implies):
        return T.implies(_as_prop(_cv(f.left, ctx)),
                         _as_prop(_cv(f.right, ctx)))
    if isinstance(f, A.Binder):
        names = [n for n, _ in f.vars]
        ctx._binders.extend(names)
        try:
            body = _as_prop(_cv(f.body, ctx))
        finally:
            del ctx._binders[len(ctx._binders) - len(names):]
        binders = [(f"q_{n}", INT) for n in names]
        return (T.forall if f.kind == "forall" else T.exists)(binders, body)
    raise UnsupportedConstruct(f"form node {type(f).__name__}")


def _conjuncts(f: A.Form) -> list[A.Form]:
    if isinstance(f, A.And):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def property_type(kind: str, form: Optional[A.Form]) -> str:
    if kind == "Meta":
        return "T3"
    if kind == "Memory":
        return "T4"
    if kind == "Overflow":
        return "T5"
    if kind == "Ecf":
        return "T6"
    if form is not None and "msg.sender" in A.form_idents(form):
        return "T2"
    return "T1"


class FnTranslator:
    def __init__(self, unit: YulUnit, fn: YulFunc, info: UnitInfo,
                 config: TranslateConfig):
        self.unit = unit
        self.fn = fn
        self.info = info
        self.config = config
        self.layout = unit.storage
        self.locals: dict[str, str] = {}
        self.tmpn = 0
        self.site = 0
        self.ghosts: list[tuple[str, Span]] = []
        self.check_overflow = any(
            s.directive is Directive.CHECK and s.pattern is Pattern.OVERFLOW
            for s in fn.specs
        )
        self.metas = list(unit.meta_specs) + [
            s for s in fn.specs if s.directive is Directive.META
        ]
        for p in fn.params:
            self.locals[p] = local_cell(p)
        if fn.ret is not None:
            self.locals[fn.ret] = RET_CELL

    # ----- helpers -------------------------------------------------------

    def fresh(self, prefix: str = "t") -> str:
        self.tmpn += 1
        return f"{prefix}{self.tmpn}"

    def word_range(self, t: Term, bits: Optional[int] = None) -> Term:
        b = bits if bits is not None else self.config.word_bits
        return T.conj(T.ge(t, ZERO), T.lt(t, T.num(1 << b)))

    def body_ctx(self, with_old: bool = False, at_exit: bool = False) -> FormCtx:
        lookup = {n: T.sym(c) for n, c in self.locals.items()}
        old = None
        if with_old:
            old = {}
            for c, sort in self.info.comp_sort.items():
                if c not in _MEM_COMPS:
                    old[c] = T.sym(f"{c}@old", sort)
            for p in self.fn.params:
                old[local_cell(p)] = T.sym(f"{local_cell(p)}@old")
        return FormCtx(
            lookup=lookup,
            layout=self.layout,
            old_rename=old,
            result=T.sym(RET_CELL) if (at_exit and self.fn.ret) else None,
            status_revert=T.sym(REVERTED_CELL, BOOL) if at_exit else None,
        )

    def spec_term(self, item: SpecItem, ctx: FormCtx) -> Term:
        lowered = lower_spec_accessors(item.form, self.layout)
        return form_to_term(lowered, ctx)

    def tag(self, kind: str, span: Span, form: Optional[A.Form],
            text: str = "", deferred: bool = False) -> ObTag:
        return ObTag(
            kind=kind,
            fn=self.fn.name,
            span=span,
            text=text or (print_form(form) if form is not None else ""),
            ptype=property_type(kind, form),
            deferred=deferred,
        )

    def snapshot(self, cell: str, span: Span) -> list[VirExpr]:
        if not self.check_overflow:
            return []
        ghost = f"chk{len(self.ghosts)}_{cell}"
        self.ghosts.append((ghost, span))
        return [VAssign(ghost, T.sym(cell))]

    # ----- expressions ---------------------------------------------------

    def expr(self, e: Expr) -> tuple[list[VirExpr], Term]:
        if isinstance(e, Num):
            return [], T.num(e.value)
        if isinstance(e, Var):
            cell = self.locals.get(e.name)
            if cell is None:
                raise A.UnboundIdentifier(f"unbound variable '{e.name}'")
            return [], T.sym(cell)
        assert isinstance(e, Call)
        pre, value = self.call_expr(e, want_value=True)
        if value is None:
            raise UnsupportedStmt(
                f"'{e.callee}' produces no value and cannot appear in an "
                "expression"
            )
        return pre, value

    def exprs(self, es) -> tuple[list[VirExpr], list[Term]]:
        pre: list[VirExpr] = []
        ts: list[Term] = []
        for e in es:
            p, t = self.expr(e)
            pre.extend(p)
            ts.append(t)
        return pre, ts

    def _pure_op(self, name: str, ts: list[Term]) -> Term:
        if name == "caller":
            return T.sym(SENDER_CELL)
        if name == "timestamp":
            return T.sym(TIME_CELL)
        a, b = (ts + [ZERO, ZERO])[:2]
        if name == "add":
            return T.add(a, b)
        if name == "sub":
            return T.sub(a, b)
        if name == "mul":
            return T.mul(a, b)
        if name == "div":
            return T.ite(T.eq(b, ZERO), ZERO, T.idiv(a, b))
        if name == "lt":
            return T.bool_word(T.lt(a, b))
        if name == "gt":
            return T.bool_word(T.gt(a, b))
        if name == "eq":
            return T.bool_word(T.eq(a, b))
        if name == "iszero":
            return T.bool_word(T.eq(a, ZERO))
        if name in ("and", "or"):
            if _boolish(a) and _boolish(b):
                j = T.conj if name == "and" else T.disj
                return T.bool_word(j(T.truthy(a), T.truthy(b)))
            return UApp(f"bit_{name}", (a, b), INT)
        raise UnsupportedConstruct(name)  # pragma: no cover

    def call_expr(self, e: Call,
                  want_value: bool) -> tuple[list[VirExpr], Optional[Term]]:
        name = e.callee
        layout = self.layout

        if name in _PURE_OPS:
            pre, ts = self.exprs(e.args)
            return pre, self._pure_op(name, ts)

        if name == "sload":
            v = _slot_var(layout, e.args[0], name)
            value = T.sym(scalar_cell(v))
            return [VAssume(self.word_range(value))], value
        if name in ("map_get", "map2_get"):
            v = _slot_var(layout, e.args[0], name)
            pre, ts = self.exprs(e.args[1:])
            key = ts[0] if name == "map_get" else UApp("kpair", tuple(ts), INT)
            value = T.select(T.sym(map_cell(v), ARR), key)
            return pre + [VAssume(self.word_range(value))], value
        if name == "arr_get":
            v = _slot_var(layout, e.args[0], name)
            pre, ts = self.exprs(e.args[1:])
            value = T.select(T.sym(arr_cell(v), ARR), ts[0])
            return pre + [VAssume(self.word_range(value))], value
        if name == "arr_len":
            v = _slot_var(layout, e.args[0], name)
            value = T.sym(len_cell(v))
            return [VAssume(T.ge(value, ZERO))], value

        if name == "mload":
            pre, ts = self.exprs(e.args)
            out, val = self.mem_op(ts[0], store_value=None, span=e.span)
            return pre + out, val

        if name in ("sstore", "map_set", "map2_set", "arr_set", "arr_push",
                    "mstore", "revert"):
            if want_value:
                raise UnsupportedStmt(
                    f"'{name}' produces no value and cannot appear in an "
                    "expression"
                )
            return self.effect_stmt(e)

        if self.unit.defines(name):
            pre, ts = self.exprs(e.args)
            out, ret = self.internal_call(name, ts, e.span)
            return pre + out, ret

        # Out-of-unit target: external call.
        pre, ts = self.exprs(e.args)
        out, ret = self.external_call(name, ts, e.span)
        return pre + out, ret

    # ----- memory --------------------------------------------------------

    def _mem_cost(self, size: Term) -> Term:
        return T.add(T.mul(T.num(3), size), T.idiv(T.mul(size, size), T.num(512)))

    def mem_op(self, addr: Term, store_value: Optional[Term],
               span: Span) -> tuple[list[VirExpr], Optional[Term]]:
        """One memory access: value/size/gas tracking plus the machine-model
        law assertions (gas delta, size rounding, content preservation)."""
        mem = T.sym(MEM_CELL, ARR)
        size0 = T.sym(MEMSIZE_CELL)
        gas0 = T.sym(GAS_CELL)
        in_bounds = T.le(T.add(addr, T.num(32)), T.mul(T.num(32), size0))
        ceiled = T.idiv(T.add(addr, T.num(64)), T.num(32))
        grown = T.ite(T.ge(size0, ceiled), size0, ceiled)
        new_size = T.ite(in_bounds, size0, grown)

        ts = self.fresh("msz")
        tg = self.fresh("mgas")
        out: list[VirExpr] = [
            VAssign(ts, new_size),
            VAssign(tg, T.sub(gas0, T.add(T.sub(self._mem_cost(T.sym(ts)),
                                                self._mem_cost(size0)),
                                          T.num(3)))),
        ]
        value: Optional[Term] = None
        if store_value is None:
            tv = self.fresh("mval")
            out.append(VAssign(tv, T.ite(in_bounds, T.select(mem, addr), ZERO)))
            value = T.sym(tv)

        size_law = T.disj(
            T.conj(in_bounds, T.eq(T.sym(ts), size0)),
            T.conj(T.neg(in_bounds), T.eq(T.sym(ts), grown)),
        )
        gas_law = T.eq(
            T.sym(tg),
            T.sub(gas0, T.add(T.sub(self._mem_cost(T.sym(ts)),
                                    self._mem_cost(size0)), T.num(3))),
        )
        mk = lambda label, prop: VAssert(  # noqa: E731
            prop,
            self.tag("Memory", span, None, text=label),
        )
        out.append(mk("memory size rounding", size_law))
        out.append(mk("memory gas accounting", gas_law))
        if store_value is None:
            i = T.sym("q_mi")
            content_law = T.forall(
                [("q_mi", INT)],
                T.implies(T.conj(T.ge(i, ZERO), T.lt(i, T.mul(T.num(32), size0))),
                          T.eq(T.select(mem, i), T.select(mem, i))),
            )
            out.append(mk("read preserves contents", content_law))
        else:
            out.append(VAssign(MEM_CELL, T.store(mem, addr, store_value)))
        out.append(VAssign(MEMSIZE_CELL, T.sym(ts)))
        out.append(VAssign(GAS_CELL, T.sym(tg)))
        if value is not None:
            out.append(VAssume(self.word_range(value)))
        return out, value

    # ----- effectful statements ------------------------------------------

    def effect_stmt(self, e: Call) -> tuple[list[VirExpr], None]:
        name = e.callee
        layout = self.layout
        if name == "sstore":
            v = _slot_var(layout, e.args[0], name)
            pre, ts = self.exprs(e.args[1:])
            return pre + [VAssign(scalar_cell(v), ts[0])], None
        if name in ("map_set", "map2_set"):
            v = _slot_var(layout, e.args[0], name)
            pre, ts = self.exprs(e.args[1:])
            cell = map_cell(v)
            key = ts[0] if name == "map_set" else UApp("kpair", tuple(ts[:2]), INT)
            val = ts[-1]
            return pre + [VAssign(cell, T.store(T.sym(cell, ARR), key, val))], None
        if name == "arr_set":
            v = _slot_var(layout, e.args[0], name)
            pre, ts = self.exprs(e.args[1:])
            cell = arr_cell(v)
            return pre + [VAssign(cell, T.store(T.sym(cell, ARR), ts[0], ts[1]))], None
        if name == "arr_push":
            v = _slot_var(layout, e.args[0], name)
            pre, ts = self.exprs(e.args[1:])
            cell, lc = arr_cell(v), len_cell(v)
            return pre + [
                VAssign(cell, T.store(T.sym(cell, ARR), T.sym(lc), ts[0])),
                VAssign(lc, T.add(T.sym(lc), T.num(1))),
            ], None
        if name == "mstore":
            pre, ts = self.exprs(e.args)
            out, _ = self.mem_op(ts[0], store_value=ts[1], span=e.span)
            return pre + out, None
        if name == "revert":
            pre, _ = self.exprs(e.args)
            return pre + self.revert_seq(), None
        raise UnsupportedConstruct(name)  # pragma: no cover

    def revert_seq(self) -> list[VirExpr]:
        out: list[VirExpr] = []
        for c in self.info.storage_cells:
            out.append(VAssign(c, T.sym(f"{c}@old", self.info.comp_sort[c])))
        out.append(VAssign(REVERTED_CELL, TRUE))
        out.append(VRaise(LEAVE))
        return out

    # ----- calls ---------------------------------------------------------

    def _uf_inputs(self, callee: str, arg_syms: list[Term]) -> tuple[Term, ...]:
        fx = self.info.effects[callee]
        comps = sorted((fx.reads | fx.writes) & set(self.info.comp_sort))
        parts = list(arg_syms)
        parts += [T.sym(f"co{self.site}_{c}", self.info.comp_sort[c])
                  for c in comps]
        parts += [T.sym(SENDER_CELL), T.sym(VALUE_CELL), T.sym(TIME_CELL)]
        return tuple(parts)

    def _contract_ctx(self, callee: YulFunc, arg_syms: list[Term],
                      ret_term: Optional[Term], site: int,
                      at_exit: bool) -> FormCtx:
        lookup = {p: a for p, a in zip(callee.params, arg_syms)}
        old = {}
        for c, sort in self.info.comp_sort.items():
            if c not in _MEM_COMPS:
                old[c] = T.sym(f"co{site}_{c}", sort)
        return FormCtx(
            lookup=lookup,
            layout=self.layout,
            old_rename=old if at_exit else None,
            result=ret_term,
            status_revert=FALSE if at_exit else None,
            strict=False,
        )

    def internal_call(self, name: str, args: list[Term],
                      span: Span) -> tuple[list[VirExpr], Optional[Term]]:
        callee = self.unit.function(name)
        fx = self.info.effects[name]
        self.site += 1
        k = self.site
        out: list[VirExpr] = []

        arg_syms: list[Term] = []
        for i, a in enumerate(args):
            cell = f"ca{k}_{i}"
            out.append(VAssign(cell, a))
            arg_syms.append(T.sym(cell))

        snap = sorted((fx.reads | fx.writes) & set(self.info.comp_sort))
        for c in snap:
            out.append(VAssign(f"co{k}_{c}",
                               T.sym(c, self.info.comp_sort[c])))

        pre_ctx = self._contract_ctx(callee, arg_syms, None, k, at_exit=False)
        for item in callee.specs:
            if item.directive is not Directive.PRE:
                continue
            try:
                term = self.spec_term(item, pre_ctx)
            except _DropConjunct:
                continue
            out.append(VAssert(term, self.tag(
                "Pre", span, item.form,
                text=f"{name} requires {print_form(item.form)}",
                deferred=item.deferred)))

        inputs = self._uf_inputs(name, arg_syms)
        for c in sorted(fx.writes & set(self.info.comp_sort)):
            out.append(VAssign(c, UApp(f"fx_{name}_{c}", inputs,
                                       self.info.comp_sort[c])))
        if MEMSIZE_CELL in fx.writes:
            out.append(VAssume(T.ge(T.sym(MEMSIZE_CELL),
                                    T.sym(f"co{k}_{MEMSIZE_CELL}"))))

        ret_term: Optional[Term] = None
        if callee.ret is not None:
            rc = f"cr{k}"
            out.append(VAssign(rc, UApp(f"fx_{name}_ret", inputs, INT)))
            ret_term = T.sym(rc)
            out.append(VAssume(self.word_range(ret_term)))

        assumes: list[VirExpr] = []
        post_ctx = self._contract_ctx(callee, arg_syms, ret_term, k,
                                      at_exit=True)
        for item in callee.specs:
            if item.directive not in (Directive.POST, Directive.META):
                continue
            if item.directive is Directive.META and not callee.public:
                continue
            lowered = lower_spec_accessors(item.form, self.layout)
            for cj in _conjuncts(lowered):
                try:
                    assumes.append(VAssume(form_to_term(cj, post_ctx)))
                except _DropConjunct:
                    continue

        if fx.can_revert:
            ab = f"cab{k}"
            out.append(VAssign(ab, UApp(f"fx_{name}_aborts", inputs, BOOL)))
            out.append(VIf(T.sym(ab, BOOL),
                           vseq(*self.revert_seq()),
                           vseq(*assumes) if assumes else VSeq(())))
        else:
            out.extend(assumes)
        return out, ret_term

    def external_call(self, name: str, args: list[Term],
                      span: Span) -> tuple[list[VirExpr], Term]:
        answer = self.config.ecf.get(name)
        if answer is None:
            raise MissingEcfAnswer(
                f"no effect answer for external call target '{name}'"
            )
        self.site += 1
        k = self.site
        out: list[VirExpr] = []
        arg_syms: list[Term] = []
        for i, a in enumerate(args):
            cell = f"ca{k}_{i}"
            out.append(VAssign(cell, a))
            arg_syms.append(T.sym(cell))

        exit_ctx = self.body_ctx(with_old=True, at_exit=True)
        meta_terms = [(m, self.spec_term(m, exit_ctx)) for m in self.metas]
        for m, term in meta_terms:
            out.append(VAssert(term, self.tag(
                "Meta", span, m.form,
                text=f"state meta before external call to {name}")))

        rc = f"cr{k}"
        if answer == "pure":
            inputs = tuple(arg_syms) + (T.sym(SENDER_CELL),)
            out.append(VAssign(rc, UApp(f"ext_{name}_ret", inputs, INT)))
            if meta_terms:
                frame_ok = T.conj(*[t for _, t in meta_terms])
                out.append(VAssert(frame_ok, self.tag(
                    "Ecf", span, None,
                    text=f"declared-pure call to {name} preserves state meta")))
        else:
            out.append(VHavoc(tuple(self.info.storage_cells),
                              note=f"impure external call to {name}"))
            out.append(VHavoc((rc,), note=f"return of {name}"))
            for _, term in [(m, self.spec_term(m, exit_ctx))
                            for m in self.metas]:
                out.append(VAssume(term))
        if name == "call":
            out.append(VAssume(T.conj(T.ge(T.sym(rc), ZERO),
                                      T.le(T.sym(rc), T.num(1)))))
        else:
            out.append(VAssume(self.word_range(T.sym(rc))))
        return out, T.sym(rc)

    # ----- statements ----------------------------------------------------

    def stmts(self, block: Block) -> list[VirExpr]:
        out: list[VirExpr] = []
        for s in block.stmts:
            out.extend(self.stmt(s))
        return out

    def stmt(self, s) -> list[VirExpr]:
        if isinstance(s, Let):
            pre, t = self.expr(s.value)
            if s.name in self.locals and s.name not in self.fn.params:
                cell = self.locals[s.name]
            else:
                cell = local_cell(s.name)
                self.locals[s.name] = cell
            return pre + [VAssign(cell, t)] + self.snapshot(cell, s.span)
        if isinstance(s, Assign):
            cell = self.locals.get(s.name)
            if cell is None:
                raise A.UnboundIdentifier(f"assignment to unbound '{s.name}'")
            pre, t = self.expr(s.value)
            return pre + [VAssign(cell, t)] + self.snapshot(cell, s.span)
        if isinstance(s, ExprStmt):
            if not isinstance(s.expr, Call):
                raise UnsupportedStmt("expression statements must be calls")
            pre, _ = self.call_expr(s.expr, want_value=False)
            return pre
        if isinstance(s, If):
            pre, c = self.expr(s.cond)
            return pre + [VIf(T.truthy(c), vseq(*self.stmts(s.body)))]
        if isinstance(s, Switch):
            pre, c = self.expr(s.scrutinee)
            cases = tuple(
                (v, vseq(*self.stmts(b))) for v, b in s.cases
            )
            default = (vseq(*self.stmts(s.default))
                       if s.default is not None else None)
            return pre + [VMatch(c, cases, default)]
        if isinstance(s, For):
            return self.for_stmt(s)
        if isinstance(s, Break):
            return [VRaise(BREAK)]
        if isinstance(s, Leave):
            return [VRaise(LEAVE)]
        if isinstance(s, SpecStmt):
            return self.point_spec(s.item)
        if isinstance(s, Block):
            return self.stmts(s)
        raise UnsupportedConstruct(type(s).__name__)  # pragma: no cover

    def point_spec(self, item: SpecItem) -> list[VirExpr]:
        ctx = self.body_ctx(with_old=True)
        if item.directive is Directive.ASSERT:
            term = self.spec_term(item, ctx)
            return [VAssert(term, self.tag("Assert", item.span, item.form))]
        if item.directive is Directive.ASSUME:
            return [VAssume(self.spec_term(item, ctx))]
        if item.directive is Directive.CHECK:
            return []
        raise UnsupportedConstruct(
            f"@{item.directive.value} is not a point annotation"
        )

    def for_stmt(self, s: For) -> list[VirExpr]:
        out = self.stmts(s.init)
        pre, c = self.expr(s.cond)
        if pre:
            raise UnsupportedConstruct(
                "loop conditions must be free of memory and call effects"
            )
        invs = []
        ctx = self.body_ctx(with_old=True)
        for item in s.specs:
            if item.directive is not Directive.INV:
                continue
            invs.append((self.spec_term(item, ctx),
                         self.tag("Inv", item.span, item.form)))
        body = vseq(*(self.stmts(s.body) + self.stmts(s.post)))
        loop = VWhile(T.truthy(c), tuple(invs), body, span=s.span)
        out.append(VTry(loop, ((BREAK, VSeq(())),)))
        return out

    # ----- function assembly ---------------------------------------------

    def entry(self) -> list[VirExpr]:
        out: list[VirExpr] = [VAssign(REVERTED_CELL, FALSE)]
        if self.fn.ret is not None:
            out.append(VAssign(RET_CELL, ZERO))
        for p in self.fn.params:
            out.append(VAssume(self.word_range(T.sym(local_cell(p)))))
        out.append(VAssume(T.conj(T.ge(T.sym(SENDER_CELL), T.num(1)),
                                  T.lt(T.sym(SENDER_CELL),
                                       T.num(1 << ADDRESS_BITS)))))
        out.append(VAssume(self.word_range(T.sym(VALUE_CELL))))
        out.append(VAssume(self.word_range(T.sym(TIME_CELL))))
        out.append(VAssume(T.ge(T.sym(MEMSIZE_CELL), ZERO)))
        out.append(VAssume(T.ge(T.sym(GAS_CELL), ZERO)))
        ctx = self.body_ctx()
        for item in self.fn.specs:
            if item.directive is Directive.PRE:
                out.append(VAssume(self.spec_term(item, ctx)))
        if self.fn.public:
            for m in self.metas:
                out.append(VAssume(self.spec_term(m, ctx)))
        return out

    def exit_handler(self) -> VirExpr:
        out: list[VirExpr] = []
        bound = T.num(1 << self.config.word_bits)
        for ghost, span in self.ghosts:
            in_range = T.conj(T.ge(T.sym(ghost), ZERO), T.lt(T.sym(ghost), bound))
            out.append(VAssert(
                T.implies(T.neg(in_range), T.sym(REVERTED_CELL, BOOL)),
                self.tag("Overflow", span, None,
                         text="assigned value within machine word range"),
            ))
        ctx = self.body_ctx(with_old=True, at_exit=True)
        for item in self.fn.specs:
            if item.directive is not Directive.POST:
                continue
            out.append(VAssert(self.spec_term(item, ctx), self.tag(
                "Post", item.span, item.form, deferred=item.deferred)))
        if self.fn.public:
            for m in self.metas:
                out.append(VAssert(self.spec_term(m, ctx),
                                   self.tag("Meta", m.span, m.form)))
        out.append(VResult(T.sym(RET_CELL) if self.fn.ret else ZERO))
        return vseq(*out)

    def translate(self) -> VirFunction:
        body_items = self.stmts(self.fn.body)
        ghost_init = [VAssign(g, ZERO) for g, _ in self.ghosts]
        requires_ctx = self.body_ctx()
        requires = [self.spec_term(i, requires_ctx)
                    for i in self.fn.specs if i.directive is Directive.PRE]
        inner = vseq(*(self.entry() + ghost_init + body_items),
                     VRaise(LEAVE))
        body = VTry(inner, ((LEAVE, self.exit_handler()),))
        return VirFunction(
            name=self.fn.name,
            params=[local_cell(p) for p in self.fn.params],
            has_result=self.fn.ret is not None,
            body=body,
            requires=requires,
            span=self.fn.span,
        )


def _boolish(t: Term) -> bool:
    if isinstance(t, T.IntVal):
        return t.value in (0, 1)
    return isinstance(t, T.Ite) and _boolish(t.then) and _boolish(t.other)


def translate_function(unit: YulUnit, fn: YulFunc, info: UnitInfo,
                       config: TranslateConfig) -> VirFunction:
    return FnTranslator(unit, fn, info, config).translate()


def translate_unit(unit: YulUnit,
                   config: Optional[TranslateConfig] = None
                   ) -> tuple[dict[str, VirFunction], UnitInfo]:
    config = config or TranslateConfig()
    info = analyze_unit(unit, config)
    out = {}
    for f in unit.functions:
        out[f.name] = translate_function(unit, f, info, config)
    return out, info
