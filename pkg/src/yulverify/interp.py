"""Concrete interpreter for annotated units.

Evaluation is structured tree-walking over the machine model: `break` and
`leave` are realized as control signals, `revert` aborts the call with the
reverted flag set and rolls storage back to the entry snapshot.  Every
executed statement consumes fuel.  Loops annotated with @learn capture a
trace row of the watched variables at each loop-head arrival (including the
arrival at which the guard fails), which feeds invariant inference.

External callees execute through a stub table; a missing stub raises
CalleeUnknown.  A stub may be a plain integer (constant return) or a
callable `stub(state, args) -> int | None` that may mutate the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from . import evm
from .annotations import (
    And,
    Arith,
    Binder,
    Cmp,
    Directive,
    Form,
    Ident,
    Implies,
    Length,
    Lit,
    MapGet,
    Not,
    Old,
    Or,
    Pow,
    Result,
    SlotRef,
    Status,
    StatusKind,
    SpecItem,
)
from .errors import (
    CalleeUnknown,
    OutOfFuel,
    UnboundIdentifier,
    WatchedUnbound,
    YulVerifyError,
)
from .evm import EvmState, StorageModel, step
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
    OPCODES,
    STORAGE_INTRINSICS,
    SpecStmt,
    Switch,
    Var,
    YulFunc,
    YulUnit,
)

Stub = Union[int, Callable[[EvmState, list[int]], Optional[int]]]


class AssertFailed(YulVerifyError):
    """A concrete run violated an @assert form."""


class _BreakSignal(Exception):
    pass


class _LeaveSignal(Exception):
    pass


class _RevertSignal(Exception):
    pass


class _AssumeFailed(Exception):
    pass


@dataclass
class Trace:
    """Watched-variable values at successive loop-head arrivals."""

    loop_id: str
    watched: tuple[str, ...]
    rows: list[tuple[int, list[int]]] = field(default_factory=list)


@dataclass
class RunOutcome:
    status: str  # "returned" | "reverted" | "assumed_false"
    result: Optional[int]
    state: EvmState
    entry: EvmState
    traces: list[Trace]
    steps: int

    @property
    def reverted(self) -> bool:
        return self.status == "reverted"


class _Interp:
    def __init__(
        self,
        unit: YulUnit,
        state: EvmState,
        wrap_bits: Optional[int],
        fuel: int,
        externals: dict[str, Stub],
    ):
        self.unit = unit
        self.state = state
        self.wrap_bits = wrap_bits
        self.fuel = fuel
        self.externals = externals
        self.traces: list[Trace] = []
        self.entry_storage: StorageModel = state.storage.copy()

    def burn(self) -> None:
        self.fuel -= 1
        if self.fuel < 0:
            raise OutOfFuel("fuel exhausted")

    # -- function calls ----------------------------------------------------
    def call_function(self, fn: YulFunc, args: list[int]) -> Optional[int]:
        if len(args) != len(fn.params):
            raise YulVerifyError(f"{fn.name} expects {len(fn.params)} args, got {len(args)}")
        env: dict[str, int] = dict(zip(fn.params, args))
        if fn.ret is not None:
            env[fn.ret] = 0
        try:
            self.exec_block(fn.body, env, fn)
        except _LeaveSignal:
            pass
        return env[fn.ret] if fn.ret is not None else None

    # -- statements --------------------------------------------------------
    def exec_block(self, block: Block, env: dict[str, int], fn: YulFunc) -> None:
        for stmt in block.stmts:
            self.exec_stmt(stmt, env, fn)

    def exec_stmt(self, stmt, env: dict[str, int], fn: YulFunc) -> None:
        self.burn()
        if isinstance(stmt, Let):
            env[stmt.name] = self.eval_required(stmt.value, env, fn)
        elif isinstance(stmt, Assign):
            if stmt.name not in env:
                raise UnboundIdentifier(f"assignment to undeclared {stmt.name!r}")
            env[stmt.name] = self.eval_required(stmt.value, env, fn)
        elif isinstance(stmt, ExprStmt):
            self.eval_expr(stmt.expr, env, fn)
        elif isinstance(stmt, SpecStmt):
            self.exec_spec(stmt.item, env, fn)
        elif isinstance(stmt, If):
            if self.eval_required(stmt.cond, env, fn) != 0:
                self.exec_block(stmt.body, env, fn)
        elif isinstance(stmt, Switch):
            scrut = self.eval_required(stmt.scrutinee, env, fn)
            for value, body in stmt.cases:
                if scrut == value:
                    self.exec_block(body, env, fn)
                    return
            if stmt.default is not None:
                self.exec_block(stmt.default, env, fn)
        elif isinstance(stmt, For):
            self.exec_for(stmt, env, fn)
        elif isinstance(stmt, Break):
            raise _BreakSignal()
        elif isinstance(stmt, Leave):
            raise _LeaveSignal()
        else:  # pragma: no cover
            raise YulVerifyError(f"unknown statement {stmt!r}")

    def exec_for(self, stmt: For, env: dict[str, int], fn: YulFunc) -> None:
        self.exec_block(stmt.init, env, fn)
        learn = next((i for i in stmt.specs if i.directive == Directive.LEARN), None)
        trace: Optional[Trace] = None
        if learn is not None:
            for name in learn.names:
                if name not in env:
                    raise WatchedUnbound(f"@learn watches {name!r}, not in scope at loop head")
            loop_id = f"{fn.name}:{stmt.span.line}:{stmt.span.col}"
            trace = Trace(loop_id, learn.names)
            self.traces.append(trace)
        iteration = 0
        try:
            while True:
                if trace is not None:
                    trace.rows.append((iteration, [env[n] for n in trace.watched]))
                self.burn()
                if self.eval_required(stmt.cond, env, fn) == 0:
                    break
                self.exec_block(stmt.body, env, fn)
                self.exec_block(stmt.post, env, fn)
                iteration += 1
        except _BreakSignal:
            pass

    def exec_spec(self, item: SpecItem, env: dict[str, int], fn: YulFunc) -> None:
        from .yul import lower_spec_accessors

        ctx = FormEnv(
            storage=self.state.storage,
            entry_storage=self.entry_storage,
            locals=env,
            message=self.state.message,
            status=None,
            result=None,
        )
        value = eval_form(lower_spec_accessors(item.form, self.unit.storage), ctx)
        if item.directive == Directive.ASSERT:
            if not value:
                raise AssertFailed(f"@assert failed at {item.span}")
        elif item.directive == Directive.ASSUME:
            if not value:
                raise _AssumeFailed()

    # -- expressions -------------------------------------------------------
    def eval_required(self, expr: Expr, env: dict[str, int], fn: YulFunc) -> int:
        value = self.eval_expr(expr, env, fn)
        if value is None:
            raise YulVerifyError("value-less call used as an expression")
        return value

    def eval_expr(self, expr: Expr, env: dict[str, int], fn: YulFunc) -> Optional[int]:
        self.burn()
        if isinstance(expr, Num):
            return expr.value
        if isinstance(expr, Var):
            if expr.name not in env:
                raise UnboundIdentifier(f"unbound variable {expr.name!r}")
            return env[expr.name]
        assert isinstance(expr, Call)
        callee = expr.callee
        if callee in OPCODES or callee in STORAGE_INTRINSICS:
            args = [self.eval_required(a, env, fn) for a in expr.args]
            return self.apply_op(callee, args)
        if self.unit.defines(callee):
            args = [self.eval_required(a, env, fn) for a in expr.args]
            return self.call_function(self.unit.function(callee), args)
        if callee in self.externals:
            args = [self.eval_required(a, env, fn) for a in expr.args]
            stub = self.externals[callee]
            if callable(stub):
                return stub(self.state, args)
            return stub
        raise CalleeUnknown(f"no definition or stub for callee {callee!r}")

    def apply_op(self, op: str, args: list[int]) -> Optional[int]:
        pushes = {
            "add",
            "mul",
            "sub",
            "div",
            "lt",
            "gt",
            "eq",
            "iszero",
            "and",
            "or",
            "caller",
            "timestamp",
            "sload",
            "mload",
            "map_get",
            "map2_get",
            "arr_get",
            "arr_len",
        }
        for a in args:
            self.state.push(a)
        self.state = step(op, self.state, self.wrap_bits)
        if self.state.reverted:
            raise _RevertSignal()
        if op in pushes:
            return self.state.pop()
        return None


@dataclass
class FormEnv:
    """Everything a concrete form evaluation needs."""

    storage: StorageModel
    entry_storage: StorageModel
    locals: dict[str, int]
    message: evm.Message
    status: Optional[str] = None  # "returned" | "reverted" | None (mid-body)
    result: Optional[int] = None


def eval_form(form: Form, ctx: FormEnv) -> Union[int, bool]:
    """Evaluate a lowered form against concrete state.

    Quantified forms are not concretely evaluable and raise ValueError.
    """
    return _ev(form, ctx, ctx.storage)


def _truthy(v: Union[int, bool]) -> bool:
    return bool(v)


def _ev(f: Form, ctx: FormEnv, storage: StorageModel) -> Union[int, bool]:
    if isinstance(f, Lit):
        return f.value
    if isinstance(f, Ident):
        if f.name == "msg.sender":
            return ctx.message.sender
        if f.name == "msg.value":
            return ctx.message.value
        if f.name in ctx.locals:
            return ctx.locals[f.name]
        raise UnboundIdentifier(f"unbound identifier {f.name!r} in form")
    if isinstance(f, SlotRef):
        if f.kind == "scalar":
            return storage.load(f.slot)
        raise YulVerifyError(f"{f.name} ({f.kind}) needs an index")
    if isinstance(f, MapGet):
        keys: list[int] = []
        base = f
        while isinstance(base, MapGet):
            keys.append(int(_ev(base.key, ctx, storage)))
            base = base.base
        keys.reverse()
        src = storage
        if isinstance(base, Old):
            src = ctx.entry_storage
            base = base.body
            while isinstance(base, MapGet):
                keys.insert(0, int(_ev(base.key, ctx, storage)))
                base = base.base
        if not isinstance(base, SlotRef):
            raise YulVerifyError(f"unlowered indexed access {f!r}")
        if base.kind == "mapping":
            if base.depth == 2:
                if len(keys) != 2:
                    raise YulVerifyError("two-level mapping needs two keys")
                return src.map_get(base.slot, evm._pair(keys[0], keys[1]))
            return src.map_get(base.slot, keys[0])
        if base.kind == "dynarray":
            return src.arr_get(base.slot, keys[0])
        raise YulVerifyError(f"indexing scalar {base.name!r}")
    if isinstance(f, Length):
        base = f.base
        src = storage
        if isinstance(base, Old):
            src = ctx.entry_storage
            base = base.body
        if isinstance(base, SlotRef) and base.kind == "dynarray":
            return src.arr_len(base.slot)
        raise YulVerifyError(f".length needs a dynamic array, got {base!r}")
    if isinstance(f, Old):
        return _ev(f.body, ctx, ctx.entry_storage)
    if isinstance(f, Result):
        if ctx.result is None:
            raise YulVerifyError("result not available")
        return ctx.result
    if isinstance(f, Status):
        if ctx.status is None:
            raise YulVerifyError("exit status not available")
        want = "reverted" if f.kind == StatusKind.REVERT else "returned"
        return ctx.status == want
    if isinstance(f, Arith):
        a = int(_ev(f.left, ctx, storage))
        b = int(_ev(f.right, ctx, storage))
        if f.op == "+":
            return a + b
        if f.op == "-":
            return a - b
        if f.op == "*":
            return a * b
        if f.op == "/":
            if b == 0:
                return 0
            sign = -1 if (a < 0) != (b < 0) else 1
            return sign * (abs(a) // abs(b))
        raise YulVerifyError(f"unknown arithmetic op {f.op!r}")
    if isinstance(f, Pow):
        return int(_ev(f.base, ctx, storage)) ** f.exp
    if isinstance(f, Cmp):
        a = _ev(f.left, ctx, storage)
        b = _ev(f.right, ctx, storage)
        a = int(a) if not isinstance(a, bool) else (1 if a else 0)
        b = int(b) if not isinstance(b, bool) else (1 if b else 0)
        return {
            "=": a == b,
            "!=": a != b,
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
        }[f.op]
    if isinstance(f, Not):
        return not _truthy(_ev(f.body, ctx, storage))
    if isinstance(f, And):
        return _truthy(_ev(f.left, ctx, storage)) and _truthy(_ev(f.right, ctx, storage))
    if isinstance(f, Or):
        return _truthy(_ev(f.left, ctx, storage)) or _truthy(_ev(f.right, ctx, storage))
    if isinstance(f, Implies):
        return (not _truthy(_ev(f.left, ctx, storage))) or _truthy(_ev(f.right, ctx, storage))
    if isinstance(f, Binder):
        raise ValueError("quantified forms are not concretely evaluable")
    raise YulVerifyError(f"unknown form node {f!r}")  # pragma: no cover


def run_function(
    unit: YulUnit,
    name: str,
    args: Sequence[int],
    *,
    state: Optional[EvmState] = None,
    wrap_bits: Optional[int] = None,
    fuel: int = 1_000_000,
    externals: Optional[dict[str, Stub]] = None,
) -> RunOutcome:
    """Run one function concretely and report the outcome.

    On revert the returned state carries the entry storage (rollback) and
    `reverted=True`.
    """
    state = state.copy() if state is not None else EvmState()
    entry = state.copy()
    interp = _Interp(unit, state, wrap_bits, fuel, externals or {})
    fn = unit.function(name)
    try:
        result = interp.call_function(fn, list(args))
        status = "returned"
    except _RevertSignal:
        result = None
        status = "reverted"
        interp.state.storage = entry.storage.copy()
        interp.state.reverted = True
    except _AssumeFailed:
        result = None
        status = "assumed_false"
    used = fuel - interp.fuel
    return RunOutcome(status, result, interp.state, entry, interp.traces, used)


def collect_loop_traces(
    unit: YulUnit,
    name: str,
    runs: Sequence[Sequence[int]],
    *,
    state: Optional[EvmState] = None,
    wrap_bits: Optional[int] = None,
    fuel: int = 1_000_000,
    externals: Optional[dict[str, Stub]] = None,
) -> dict[str, list[Trace]]:
    """Run a function once per argument vector; group traces by loop."""
    grouped: dict[str, list[Trace]] = {}
    for args in runs:
        outcome = run_function(
            unit, name, args, state=state, wrap_bits=wrap_bits, fuel=fuel, externals=externals
        )
        for tr in outcome.traces:
            grouped.setdefault(tr.loop_id, []).append(tr)
    return grouped
