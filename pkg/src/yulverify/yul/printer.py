"""Source rendering for parsed units (inverse of the parser up to layout)."""

from __future__ import annotations

from ..annotations import print_spec_item
from .ast import (
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
    Stmt,
    Switch,
    Var,
    YulFunc,
    YulUnit,
)
from .storage import DYNARRAY, MAPPING

_KIND_TYPES = {MAPPING: "mapping", DYNARRAY: "uint256[]", "scalar": "uint256"}


def print_expr(e: Expr) -> str:
    if isinstance(e, Num):
        return hex(e.value) if e.value >= 1 << 32 else str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.callee}({', '.join(print_expr(a) for a in e.args)})"
    raise TypeError(f"unknown expression {e!r}")


def _print_stmt(s: Stmt, ind: str, out: list[str]) -> None:
    if isinstance(s, Let):
        out.append(f"{ind}let {s.name} := {print_expr(s.value)}")
    elif isinstance(s, Assign):
        out.append(f"{ind}{s.name} := {print_expr(s.value)}")
    elif isinstance(s, ExprStmt):
        out.append(f"{ind}{print_expr(s.expr)}")
    elif isinstance(s, SpecStmt):
        out.append(f"{ind}/* {print_spec_item(s.item)} */")
    elif isinstance(s, If):
        out.append(f"{ind}if {print_expr(s.cond)} {{")
        _print_block_body(s.body, ind + "    ", out)
        out.append(f"{ind}}}")
    elif isinstance(s, Switch):
        out.append(f"{ind}switch {print_expr(s.scrutinee)}")
        for value, block in s.cases:
            out.append(f"{ind}case {value} {{")
            _print_block_body(block, ind + "    ", out)
            out.append(f"{ind}}}")
        if s.default is not None:
            out.append(f"{ind}default {{")
            _print_block_body(s.default, ind + "    ", out)
            out.append(f"{ind}}}")
    elif isinstance(s, For):
        for item in s.specs:
            out.append(f"{ind}/* {print_spec_item(item)} */")
        init = _inline_block(s.init)
        post = _inline_block(s.post)
        out.append(f"{ind}for {init} {print_expr(s.cond)} {post} {{")
        _print_block_body(s.body, ind + "    ", out)
        out.append(f"{ind}}}")
    elif isinstance(s, Break):
        out.append(f"{ind}break")
    elif isinstance(s, Leave):
        out.append(f"{ind}leave")
    else:
        raise TypeError(f"unknown statement {s!r}")


def _inline_block(b: Block) -> str:
    parts: list[str] = []
    for s in b.stmts:
        sub: list[str] = []
        _print_stmt(s, "", sub)
        parts.extend(sub)
    inner = " ".join(parts)
    return f"{{ {inner} }}" if inner else "{}"


def _print_block_body(b: Block, ind: str, out: list[str]) -> None:
    for s in b.stmts:
        _print_stmt(s, ind, out)


def print_function(f: YulFunc, ind: str = "") -> str:
    out: list[str] = []
    for item in f.specs:
        out.append(f"{ind}/* {print_spec_item(item)} */")
    sig = f"{ind}function {f.name}({', '.join(f.params)})"
    if f.ret:
        sig += f" -> {f.ret}"
    out.append(sig + " {")
    _print_block_body(f.body, ind + "    ", out)
    out.append(f"{ind}}}")
    return "\n".join(out)


def print_unit(u: YulUnit) -> str:
    out: list[str] = []
    if len(u.storage):
        out.append("/*")
        for sv in sorted(u.storage, key=lambda v: v.slot):
            ty = "mapping(uint256 => mapping(uint256 => uint256))" if sv.depth == 2 else _KIND_TYPES[sv.kind]
            out.append(f" * @storage {sv.name} : {ty}")
        out.append(" */")
    for item in u.meta_specs:
        out.append(f"/* {print_spec_item(item)} */")
    for f in u.functions:
        out.append("")
        out.append(print_function(f))
    return "\n".join(out) + "\n"
