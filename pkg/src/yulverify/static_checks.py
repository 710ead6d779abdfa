"""Pattern findings that are control-flow properties rather than sequents.

Two of the three checkable patterns are discharged here by static analysis
over the contract IR (the third — overflow — is encoded into proof
obligations by the translator):

* ``reentrancy``: an external call site after which, on some path, contract
  storage is still written — directly or inside a transitively-called
  internal function.  Each call site yields at most one finding, carrying the
  first (shortest) witnessing write.
* ``timestamp``: block-timestamp dependence, both as data flow (a value
  derived from the timestamp reaches storage or the return value) and as
  control flow (a timestamp-derived branch guards a storage write or an exit).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .annotations import Directive, Pattern, Span
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
    Switch,
    Var,
    YulFunc,
    YulUnit,
    WRITE_INTRINSICS,
)
from .yul.parse import BUILTINS


@dataclass(frozen=True)
class Finding:
    pattern: str
    fn: str  # the annotated (checked) function
    span: Span  # primary location (call site / write / branch)
    message: str
    chain: tuple[str, ...] = ()
    related: Optional[Span] = None

    def location(self) -> str:
        return f"line {self.span.line}"


def run_static_checks(unit: YulUnit) -> list[Finding]:
    out: list[Finding] = []
    for fn in unit.functions:
        for item in fn.specs:
            if item.directive is not Directive.CHECK:
                continue
            if item.pattern is Pattern.REENTRANCY:
                out.extend(check_reentrancy(unit, fn))
            elif item.pattern is Pattern.TIMESTAMP:
                out.extend(check_timestamp(unit, fn))
    # Deterministic order, stable across dict/set iteration.
    out.sort(key=lambda f: (f.pattern, f.span.line, f.span.col, f.message))
    return out


# ---------------------------------------------------------------------------
# Reentrancy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Site:
    span: Span
    callee: str
    chain: tuple[str, ...]


def _is_external(unit: YulUnit, c: Call) -> bool:
    if c.callee == "call":
        return True
    return c.callee not in BUILTINS and not unit.defines(c.callee)


def check_reentrancy(unit: YulUnit, root: YulFunc) -> list[Finding]:
    findings: list[Finding] = []
    claimed: set[tuple[int, int]] = set()  # call sites already reported

    def fire(sites: list[_Site], write: Call, where: str) -> list[_Site]:
        for site in sites:
            key = (site.span.line, site.span.col)
            if key in claimed:
                continue
            claimed.add(key)
            # Render the call path without the root (the finding is already
            # attributed to it) and without stuttering repeated frames.
            path: list[str] = []
            for name in site.chain + (where,):
                if not path or path[-1] != name:
                    path.append(name)
            if path and path[0] == root.name:
                path = path[1:]
            via = " via " + " -> ".join(path) if path else ""
            findings.append(Finding(
                pattern="reentrancy",
                fn=root.name,
                span=site.span,
                message=(f"storage write ({write.callee}, line "
                         f"{write.span.line}) can run after the external "
                         f"call to {site.callee}{via}"),
                chain=site.chain + (where,),
                related=write.span,
            ))
        return []

    def walk_expr(e: Expr, fn: YulFunc, sites: list[_Site],
                  stack: tuple[str, ...]) -> list[_Site]:
        if not isinstance(e, Call):
            return sites
        for a in e.args:
            sites = walk_expr(a, fn, sites, stack)
        if e.callee in WRITE_INTRINSICS:
            return fire(sites, e, fn.name)
        if _is_external(unit, e):
            return sites + [_Site(e.span, e.callee, stack)]
        if unit.defines(e.callee) and e.callee not in stack:
            callee = unit.function(e.callee)
            return walk_block(callee.body, callee, sites,
                              stack + (e.callee,))
        return sites

    def walk_stmt(s, fn: YulFunc, sites: list[_Site],
                  stack: tuple[str, ...]) -> list[_Site]:
        if isinstance(s, (Let, Assign)):
            return walk_expr(s.value, fn, sites, stack)
        if isinstance(s, ExprStmt):
            return walk_expr(s.expr, fn, sites, stack)
        if isinstance(s, If):
            sites = walk_expr(s.cond, fn, sites, stack)
            inside = walk_block(s.body, fn, list(sites), stack)
            return _merge_sites(sites, inside)
        if isinstance(s, Switch):
            sites = walk_expr(s.scrutinee, fn, sites, stack)
            merged = list(sites)
            for _, body in s.cases:
                merged = _merge_sites(merged,
                                      walk_block(body, fn, list(sites), stack))
            if s.default is not None:
                merged = _merge_sites(
                    merged, walk_block(s.default, fn, list(sites), stack))
            return merged
        if isinstance(s, For):
            sites = walk_block(s.init, fn, sites, stack)
            sites = walk_expr(s.cond, fn, sites, stack)
            # Two passes over the body: a write early in iteration n+1 runs
            # after a call late in iteration n.
            for _ in range(2):
                once = walk_block(s.body, fn, list(sites), stack)
                once = walk_block(s.post, fn, once, stack)
                once = walk_expr(s.cond, fn, once, stack)
                sites = _merge_sites(sites, once)
            return sites
        if isinstance(s, (Break, Leave, SpecStmt)):
            return sites
        if isinstance(s, Block):
            return walk_block(s, fn, sites, stack)
        return sites

    def walk_block(b: Block, fn: YulFunc, sites: list[_Site],
                   stack: tuple[str, ...]) -> list[_Site]:
        for s in b.stmts:
            sites = walk_stmt(s, fn, sites, stack)
        return sites

    walk_block(root.body, root, [], (root.name,))
    return findings


def _merge_sites(a: list[_Site], b: list[_Site]) -> list[_Site]:
    seen = {(s.span.line, s.span.col) for s in a}
    out = list(a)
    for s in b:
        if (s.span.line, s.span.col) not in seen:
            seen.add((s.span.line, s.span.col))
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# Timestamp dependence
# ---------------------------------------------------------------------------


@dataclass
class _TsSummary:
    ret_tainted: bool = False
    findings: list[Finding] = field(default_factory=list)


def check_timestamp(unit: YulUnit, root: YulFunc) -> list[Finding]:
    findings: list[Finding] = []
    reported: set[tuple[str, int, int]] = set()

    def report(kind: str, span: Span, message: str,
               chain: tuple[str, ...]) -> None:
        key = (kind, span.line, span.col)
        if key in reported:
            return
        reported.add(key)
        findings.append(Finding(
            pattern="timestamp", fn=root.name, span=span,
            message=message, chain=chain))

    def expr_taint(e: Expr, env: dict[str, bool], fn: YulFunc,
                   guard: bool, stack: tuple[str, ...]) -> bool:
        if isinstance(e, Num):
            return False
        if isinstance(e, Var):
            return env.get(e.name, False)
        assert isinstance(e, Call)
        if e.callee == "timestamp":
            return True
        arg_taints = [expr_taint(a, env, fn, guard, stack) for a in e.args]
        if unit.defines(e.callee) and e.callee not in stack:
            callee = unit.function(e.callee)
            cenv = {p: t for p, t in zip(callee.params, arg_taints)}
            if callee.ret is not None:
                cenv[callee.ret] = False
            summary = _TsSummary()
            walk_block(callee.body, callee, cenv, guard,
                       stack + (e.callee,), summary)
            return summary.ret_tainted
        if e.callee in ("sload", "map_get", "map2_get", "arr_get", "arr_len",
                        "mload", "caller"):
            return False
        if e.callee in BUILTINS:
            return any(arg_taints)
        return False  # external call results are not timestamp-derived here

    def walk_stmt(s, fn: YulFunc, env: dict[str, bool], guard: bool,
                  stack: tuple[str, ...], summary: _TsSummary) -> None:
        chain = stack
        if isinstance(s, (Let, Assign)):
            t = expr_taint(s.value, env, fn, guard, stack)
            env[s.name] = t
            if fn.ret is not None and s.name == fn.ret:
                summary.ret_tainted = summary.ret_tainted or t
                if t and fn is root:
                    report("ret-data", s.span,
                           "returned value derives from the block timestamp",
                           chain)
            return
        if isinstance(s, ExprStmt) and isinstance(s.expr, Call):
            c = s.expr
            if c.callee in WRITE_INTRINSICS:
                value_tainted = any(
                    expr_taint(a, env, fn, guard, stack) for a in c.args[1:]
                )
                if value_tainted:
                    report("write-data", c.span,
                           f"value written to storage by {c.callee} derives "
                           "from the block timestamp", chain)
                elif guard:
                    report("write-ctl", c.span,
                           f"storage write ({c.callee}) is guarded by a "
                           "timestamp-dependent branch", chain)
            else:
                expr_taint(c, env, fn, guard, stack)
            return
        if isinstance(s, If):
            ct = expr_taint(s.cond, env, fn, guard, stack)
            walk_block(s.body, fn, env, guard or ct, stack, summary)
            return
        if isinstance(s, Switch):
            ct = expr_taint(s.scrutinee, env, fn, guard, stack)
            for _, body in s.cases:
                walk_block(body, fn, env, guard or ct, stack, summary)
            if s.default is not None:
                walk_block(s.default, fn, env, guard or ct, stack, summary)
            return
        if isinstance(s, For):
            walk_block(s.init, fn, env, guard, stack, summary)
            ct = expr_taint(s.cond, env, fn, guard, stack)
            for _ in range(2):
                walk_block(s.body, fn, env, guard or ct, stack, summary)
                walk_block(s.post, fn, env, guard or ct, stack, summary)
            return
        if isinstance(s, Leave):
            if guard:
                report("exit-ctl", s.span,
                       "an exit path is guarded by a timestamp-dependent "
                       "branch", chain)
            return
        if isinstance(s, Block):
            walk_block(s, fn, env, guard, stack, summary)

    def walk_block(b: Block, fn: YulFunc, env: dict[str, bool], guard: bool,
                   stack: tuple[str, ...], summary: _TsSummary) -> None:
        for s in b.stmts:
            walk_stmt(s, fn, env, guard, stack, summary)

    env = {p: False for p in root.params}
    if root.ret is not None:
        env[root.ret] = False
    walk_block(root.body, root, env, False, (root.name,), _TsSummary())
    return findings
