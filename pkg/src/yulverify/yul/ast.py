"""AST for the restricted Yul-style contract IR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..annotations import Span, SpecItem


class Expr:
    span: Span


@dataclass(frozen=True)
class Num(Expr):
    value: int
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass(frozen=True)
class Call(Expr):
    callee: str
    args: tuple[Expr, ...]
    span: Span = field(default=Span(0, 0), compare=False)


class Stmt:
    span: Span


@dataclass
class Block:
    stmts: list[Stmt]
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class Let(Stmt):
    name: str
    value: Expr
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class Assign(Stmt):
    name: str
    value: Expr
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class ExprStmt(Stmt):
    """A bare call evaluated for effect; the value is dropped."""

    expr: Expr
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class If(Stmt):
    cond: Expr
    body: Block
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class Switch(Stmt):
    scrutinee: Expr
    cases: list[tuple[int, Block]]
    default: Optional[Block]
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class For(Stmt):
    init: Block
    cond: Expr
    post: Block
    body: Block
    specs: list[SpecItem] = field(default_factory=list)
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class Break(Stmt):
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class Leave(Stmt):
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class SpecStmt(Stmt):
    """A point annotation (@assert/@assume) materialized at its program point."""

    item: SpecItem
    span: Span = field(default=Span(0, 0), compare=False)


@dataclass
class YulFunc:
    name: str
    params: list[str]
    ret: Optional[str]
    body: Block
    specs: list[SpecItem] = field(default_factory=list)
    span: Span = field(default=Span(0, 0), compare=False)

    @property
    def public(self) -> bool:
        return not self.name.startswith("_")


@dataclass
class YulUnit:
    functions: list[YulFunc]
    storage: "StorageLayout"
    meta_specs: list[SpecItem] = field(default_factory=list)
    source: str = ""

    def function(self, name: str) -> YulFunc:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def defines(self, name: str) -> bool:
        return any(f.name == name for f in self.functions)


# Imported late to avoid a cycle; StorageLayout lives in .storage.
from .storage import StorageLayout  # noqa: E402
