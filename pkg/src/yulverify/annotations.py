"""Specification annotations embedded in source comments.

Directives: @pre, @post, @meta, @inv, @assume, @assert, @check <pattern>,
@learn <names...>.  A directive may carry the `@coq` prefix, which defers its
obligations to an exported theorem file instead of SMT discharge; deferral is
only legal on @pre/@post/@meta.

Forms are boolean/arithmetic expressions over contract state variables,
function parameters and locals, `msg.sender`/`msg.value`, `old <access>`
(entry-state value), `result` (return value, post only), the exit-status
atoms `return`/`revert`, and `forall`/`exists` binders.  All declared sorts
(address, uint256, bool, int) share the word sort: mathematical integer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .errors import (
    IllegalDeferred,
    OldOutsidePost,
    ParseError,
    ResultOutsidePost,
    UnboundIdentifier,
    UnknownDirective,
)


class Directive(Enum):
    PRE = "pre"
    POST = "post"
    META = "meta"
    INV = "inv"
    ASSUME = "assume"
    ASSERT = "assert"
    CHECK = "check"
    LEARN = "learn"


class Pattern(Enum):
    OVERFLOW = "overflow"
    REENTRANCY = "reentrancy"
    TIMESTAMP = "timestamp"


#: Directives that admit the @coq deferral prefix.
DEFERRABLE = {Directive.PRE, Directive.POST, Directive.META}

#: Declared sorts; every one maps to the word sort (mathematical integer).
SORTS = ("address", "uint256", "bool", "int")


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# ---------------------------------------------------------------------------
# Form AST
# ---------------------------------------------------------------------------


class Form:
    """Base class for form/expression nodes."""


@dataclass(frozen=True)
class Lit(Form):
    value: int


@dataclass(frozen=True)
class Ident(Form):
    name: str


@dataclass(frozen=True)
class MapGet(Form):
    base: Form
    key: Form


@dataclass(frozen=True)
class Length(Form):
    base: Form


@dataclass(frozen=True)
class Old(Form):
    body: Form


@dataclass(frozen=True)
class Result(Form):
    pass


class StatusKind(Enum):
    RETURN = "return"
    REVERT = "revert"


@dataclass(frozen=True)
class Status(Form):
    kind: StatusKind


@dataclass(frozen=True)
class SlotRef(Form):
    """A state-variable identifier resolved to its storage slot.

    Produced by accessor lowering; `kind` is scalar/mapping/dynarray and
    `depth` the mapping nesting depth.
    """

    name: str
    slot: int
    kind: str
    depth: int = 1


@dataclass(frozen=True)
class Arith(Form):
    op: str  # + - * /
    left: Form
    right: Form


@dataclass(frozen=True)
class Pow(Form):
    base: Form
    exp: int


@dataclass(frozen=True)
class Cmp(Form):
    op: str  # = != < <= > >=
    left: Form
    right: Form


@dataclass(frozen=True)
class Not(Form):
    body: Form


@dataclass(frozen=True)
class And(Form):
    left: Form
    right: Form


@dataclass(frozen=True)
class Or(Form):
    left: Form
    right: Form


@dataclass(frozen=True)
class Implies(Form):
    left: Form
    right: Form


@dataclass(frozen=True)
class Binder(Form):
    kind: str  # "forall" | "exists"
    vars: tuple[tuple[str, str], ...]  # (name, declared sort)
    body: Form


@dataclass(frozen=True)
class SpecItem:
    directive: Directive
    span: Span
    deferred: bool = False
    form: Optional[Form] = None
    pattern: Optional[Pattern] = None
    names: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<hex>0x[0-9a-fA-F_]+)
  | (?P<num>\d+)
  | (?P<op>\*\*|->|==|!=|<=|>=|&&|\|\||[()\[\],:<>=!+\-*/^.])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"old", "result", "return", "revert", "forall", "exists", "true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int, col0: int) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = line0, col0
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup or ""
        value = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, value, line, col))
        nl = value.count("\n")
        if nl:
            line += nl
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        i = m.end()
    return toks


class _FormParser:
    def __init__(self, toks: list[_Tok], end_line: int, end_col: int):
        self.toks = toks
        self.pos = 0
        self.end_line = end_line
        self.end_col = end_col

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of form", self.end_line, self.end_col)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    # form := implication (right associative)
    def form(self) -> Form:
        left = self.disjunction()
        if self.at("->"):
            self.next()
            return Implies(left, self.form())
        return left

    def disjunction(self) -> Form:
        left = self.conjunction()
        while self.at("||"):
            self.next()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Form:
        left = self.unary()
        while self.at("&&"):
            self.next()
            left = And(left, self.unary())
        return left

    def unary(self) -> Form:
        tok = self.peek()
        if tok is not None and tok.text == "!":
            self.next()
            return Not(self.unary())
        if tok is not None and tok.text in ("forall", "exists"):
            self.next()
            binders = [self._binder()]
            while self.at(","):
                # Lookahead: `, name :` continues the binder list, otherwise
                # the comma ends the binder list and starts the body.
                save = self.pos
                self.next()
                if (
                    self.peek() is not None
                    and self.peek().kind == "ident"
                    and self.pos + 1 < len(self.toks)
                    and self.toks[self.pos + 1].text == ":"
                ):
                    binders.append(self._binder())
                else:
                    self.pos = save
                    break
            self.expect(",")
            return Binder(tok.text, tuple(binders), self.form())
        return self.comparison()

    def _binder(self) -> tuple[str, str]:
        name = self.next()
        if name.kind != "ident" or name.text in _KEYWORDS:
            raise ParseError("expected binder name", name.line, name.col)
        self.expect(":")
        sort = self.next()
        if sort.text not in SORTS:
            raise ParseError(f"unknown sort {sort.text!r}", sort.line, sort.col)
        return (name.text, sort.text)

    def comparison(self) -> Form:
        left = self.expr()
        tok = self.peek()
        if tok is not None and tok.text in ("=", "==", "!=", "<", "<=", ">", ">="):
            self.next()
            op = "=" if tok.text == "==" else tok.text
            return Cmp(op, left, self.expr())
        return left

    def expr(self) -> Form:
        left = self.term()
        while self.peek() is not None and self.peek().text in ("+", "-"):
            op = self.next().text
            left = Arith(op, left, self.term())
        return left

    def term(self) -> Form:
        left = self.factor()
        while self.peek() is not None and self.peek().text in ("*", "/"):
            op = self.next().text
            left = Arith(op, left, self.factor())
        return left

    def factor(self) -> Form:
        base = self.primary()
        if self.peek() is not None and self.peek().text in ("^", "**"):
            tok = self.next()
            e = self.next()
            if e.kind not in ("num", "hex"):
                raise ParseError("exponent must be a literal", e.line, e.col)
            return Pow(base, int(e.text.replace("_", ""), 0))
        return base

    def primary(self) -> Form:
        tok = self.next()
        if tok.kind in ("num", "hex"):
            return Lit(int(tok.text.replace("_", ""), 0))
        if tok.text == "(":
            inner = self.form()
            self.expect(")")
            return self._postfix(inner)
        if tok.text == "-":
            return Arith("-", Lit(0), self.factor())
        if tok.kind == "ident":
            if tok.text == "old":
                return Old(self.primary())
            if tok.text == "result":
                return self._postfix(Result())
            if tok.text == "return":
                return Status(StatusKind.RETURN)
            if tok.text == "revert":
                return Status(StatusKind.REVERT)
            if tok.text == "true":
                return Lit(1)
            if tok.text == "false":
                return Lit(0)
            if tok.text in ("forall", "exists"):
                raise ParseError(f"{tok.text} not allowed here", tok.line, tok.col)
            return self._postfix(Ident(tok.text))
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    def _postfix(self, base: Form) -> Form:
        while True:
            if self.at("["):
                self.next()
                key = self.expr()
                self.expect("]")
                base = MapGet(base, key)
            elif self.at("."):
                self.next()
                name = self.next()
                if name.kind != "ident":
                    raise ParseError("expected member name", name.line, name.col)
                if name.text == "length":
                    base = Length(base)
                elif isinstance(base, Ident):
                    base = Ident(f"{base.name}.{name.text}")
                else:
                    raise ParseError(f"unknown member {name.text!r}", name.line, name.col)
            else:
                return base


def parse_form(text: str, line: int = 1, col: int = 1) -> Form:
    """Parse a single form from text.  Raises ParseError with position."""
    toks = _tokenize(text, line, col)
    if not toks:
        raise ParseError("empty form", line, col)
    parser = _FormParser(toks, line, col + len(text))
    form = parser.form()
    tok = parser.peek()
    if tok is not None:
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return form


# ---------------------------------------------------------------------------
# Comment-block parsing
# ---------------------------------------------------------------------------

_DIRECTIVES = {d.value for d in Directive} | {"coq"}
_AT_RE = re.compile(r"@([A-Za-z_][A-Za-z0-9_]*)")


def strip_comment(text: str) -> str:
    """Remove comment decoration, preserving line structure and column width."""
    out = []
    for raw in text.splitlines():
        line = raw
        line = re.sub(r"^(\s*)/\*+", lambda m: " " * len(m.group(0)), line)
        line = re.sub(r"\*+/\s*$", lambda m: " " * len(m.group(0)), line)
        line = re.sub(r"^(\s*)\*(?!/)", lambda m: " " * len(m.group(0)), line)
        line = re.sub(r"^(\s*)//+", lambda m: " " * len(m.group(0)), line)
        out.append(line)
    return "\n".join(out)


def parse_spec_comment(text: str, line0: int = 1) -> list[SpecItem]:
    """Parse every directive in a comment block into SpecItems.

    `line0` is the source line of the block's first line, for spans.
    """
    body = strip_comment(text)
    # Locate directive starts.
    marks: list[tuple[int, str]] = []
    for m in _AT_RE.finditer(body):
        word = m.group(1)
        if word not in _DIRECTIVES:
            line = body.count("\n", 0, m.start()) + line0
            col = m.start() - (body.rfind("\n", 0, m.start()) + 1) + 1
            raise UnknownDirective(f"unknown directive @{word}", line, col)
        marks.append((m.start(), word))
    items: list[SpecItem] = []
    i = 0
    while i < len(marks):
        start, word = marks[i]
        deferred = False
        if word == "coq":
            deferred = True
            i += 1
            if i >= len(marks):
                line = body.count("\n", 0, start) + line0
                raise IllegalDeferred(f"@coq with no following directive (line {line})")
            start2, word = marks[i]
            between = body[start + len("@coq") : start2]
            if between.strip():
                line = body.count("\n", 0, start) + line0
                raise ParseError("unexpected text between @coq and directive", line, 1)
            start = start2
        directive = Directive(word)
        if deferred and directive not in DEFERRABLE:
            raise IllegalDeferred(f"@coq not allowed on @{directive.value}")
        end = marks[i + 1][0] if i + 1 < len(marks) else len(body)
        # @coq of the *next* item must not be swallowed into this item's text.
        payload = body[start + 1 + len(word) : end]
        line = body.count("\n", 0, start) + line0
        col = start - (body.rfind("\n", 0, start) + 1) + 1
        span = Span(line, col)
        items.append(_parse_item(directive, deferred, payload, span, line))
        i += 1
    return items


def _parse_item(directive: Directive, deferred: bool, payload: str, span: Span, line: int) -> SpecItem:
    text = payload.strip()
    if directive == Directive.CHECK:
        name = text.strip().lower().replace("re-entrancy", "reentrancy")
        try:
            pattern = Pattern(name)
        except ValueError:
            raise ParseError(f"unknown check pattern {text!r}", span.line, span.col)
        return SpecItem(directive, span, deferred, pattern=pattern)
    if directive == Directive.LEARN:
        names = tuple(text.split())
        for n in names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", n):
                raise ParseError(f"bad watched name {n!r}", span.line, span.col)
        if not names:
            raise ParseError("@learn needs at least one name", span.line, span.col)
        return SpecItem(directive, span, deferred, names=names)
    form = parse_form(payload, line, span.col)
    return SpecItem(directive, span, deferred, form=form)


# ---------------------------------------------------------------------------
# Printer (inverse of the parser up to whitespace)
# ---------------------------------------------------------------------------


def print_form(f: Form) -> str:
    return _pr(f, 0)


# Precedence levels: 1 implies, 2 or, 3 and, 4 not, 5 cmp, 6 +- , 7 */, 8 pow/primary
def _pr(f: Form, ctx: int) -> str:
    if isinstance(f, Lit):
        return str(f.value)
    if isinstance(f, SlotRef):
        return f.name
    if isinstance(f, Ident):
        return f.name
    if isinstance(f, Result):
        return "result"
    if isinstance(f, Status):
        return f.kind.value
    if isinstance(f, MapGet):
        return f"{_pr(f.base, 8)}[{_pr(f.key, 0)}]"
    if isinstance(f, Length):
        return f"{_pr(f.base, 8)}.length"
    if isinstance(f, Old):
        return _wrap(f"old {_pr(f.body, 8)}", ctx > 8)
    if isinstance(f, Pow):
        return _wrap(f"{_pr(f.base, 8)}^{f.exp}", ctx > 7)
    if isinstance(f, Arith):
        prec = 6 if f.op in "+-" else 7
        left = _pr(f.left, prec)
        right = _pr(f.right, prec + 1)
        return _wrap(f"{left} {f.op} {right}", ctx > prec)
    if isinstance(f, Cmp):
        return _wrap(f"{_pr(f.left, 6)} {f.op} {_pr(f.right, 6)}", ctx > 5)
    if isinstance(f, Not):
        return _wrap(f"!{_pr(f.body, 5)}", ctx > 4)
    if isinstance(f, And):
        return _wrap(f"{_pr(f.left, 3)} && {_pr(f.right, 4)}", ctx > 3)
    if isinstance(f, Or):
        return _wrap(f"{_pr(f.left, 2)} || {_pr(f.right, 3)}", ctx > 2)
    if isinstance(f, Implies):
        return _wrap(f"{_pr(f.left, 2)} -> {_pr(f.right, 1)}", ctx > 1)
    if isinstance(f, Binder):
        bs = ", ".join(f"{n}: {s}" for n, s in f.vars)
        return _wrap(f"{f.kind} {bs}, {_pr(f.body, 1)}", ctx > 1)
    raise TypeError(f"unknown form node {f!r}")  # pragma: no cover


def _wrap(s: str, need: bool) -> str:
    return f"({s})" if need else s


def print_spec_item(item: SpecItem) -> str:
    prefix = "@coq " if item.deferred else ""
    if item.directive == Directive.CHECK:
        return f"{prefix}@check {item.pattern.value}"
    if item.directive == Directive.LEARN:
        return f"{prefix}@learn {' '.join(item.names)}"
    return f"{prefix}@{item.directive.value} {print_form(item.form)}"


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


@dataclass
class Scope:
    """Names visible to a form, by category."""

    state_vars: frozenset[str] = frozenset()
    params: frozenset[str] = frozenset()
    locals: frozenset[str] = frozenset()
    has_result: bool = True

    BUILTINS = frozenset({"msg.sender", "msg.value"})


def resolve(item: SpecItem, scope: Scope) -> SpecItem:
    """Check that every identifier in the item's form is bound and that
    `old`/`result` appear only where they are meaningful.  Returns the item."""
    if item.form is None:
        if item.directive == Directive.LEARN:
            for n in item.names:
                if n not in scope.locals and n not in scope.params:
                    raise UnboundIdentifier(f"@learn watches unknown variable {n!r}")
        return item
    in_post = item.directive == Directive.POST
    old_ok = item.directive not in (Directive.PRE, Directive.META)

    def walk(f: Form, bound: frozenset[str]) -> None:
        if isinstance(f, Ident):
            name = f.name
            if (
                name in bound
                or name in scope.state_vars
                or name in scope.params
                or name in scope.locals
                or name in Scope.BUILTINS
            ):
                return
            raise UnboundIdentifier(f"unbound identifier {name!r}")
        if isinstance(f, Old):
            if not old_ok:
                raise OldOutsidePost(f"old not allowed in @{item.directive.value}")
            root = f.body
            while isinstance(root, (MapGet, Length)):
                root = root.base
            if not (
                isinstance(root, Ident)
                and (
                    root.name in scope.state_vars
                    or root.name in scope.params
                    or root.name in Scope.BUILTINS
                )
            ):
                raise OldOutsidePost("old applies only to state variables or parameters")
            walk(f.body, bound)
            return
        if isinstance(f, Result):
            if not (in_post and scope.has_result):
                raise ResultOutsidePost("result only meaningful in @post of a returning function")
            return
        if isinstance(f, Binder):
            inner = bound | frozenset(n for n, _ in f.vars)
            walk(f.body, inner)
            return
        for child in _children(f):
            walk(child, bound)

    walk(item.form, frozenset())
    return item


def _children(f: Form) -> Sequence[Form]:
    if isinstance(f, (Lit, Ident, Result, Status, SlotRef)):
        return ()
    if isinstance(f, MapGet):
        return (f.base, f.key)
    if isinstance(f, Length):
        return (f.base,)
    if isinstance(f, Old):
        return (f.body,)
    if isinstance(f, Pow):
        return (f.base,)
    if isinstance(f, (Arith, Cmp)):
        return (f.left, f.right)
    if isinstance(f, Not):
        return (f.body,)
    if isinstance(f, (And, Or, Implies)):
        return (f.left, f.right)
    if isinstance(f, Binder):
        return (f.body,)
    raise TypeError(f"unknown form node {f!r}")  # pragma: no cover


def form_idents(f: Form) -> set[str]:
    """Free identifiers referenced by a form (excluding binder-bound names)."""
    out: set[str] = set()

    def walk(node: Form, bound: frozenset[str]) -> None:
        if isinstance(node, Ident):
            if node.name not in bound:
                out.add(node.name)
            return
        if isinstance(node, Binder):
            walk(node.body, bound | frozenset(n for n, _ in node.vars))
            return
        for child in _children(node):
            walk(child, bound)

    walk(f, frozenset())
    return out


def mentions_status(f: Form) -> bool:
    if isinstance(f, Status):
        return True
    return any(mentions_status(c) for c in _children(f))
