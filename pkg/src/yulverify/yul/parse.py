"""Parser for the restricted Yul-style grammar.

Statements: block, let, assignment, expression statement, if, switch/case/
default, for, break, leave, function definition.  Expressions: identifier,
call, natural literal (decimal or hex).  Functions return at most one value;
multiple returns are rejected.

Comments carry the specification annotations.  A comment block binds to the
construct that immediately follows it: function definitions take
@pre/@post/@check items, `for` loops take @inv/@learn items, and
@assert/@assume items become point statements at their position.  Top-level
comments may also declare state variables with `@storage name : type` lines
(declaration order assigns slots) and contract-level @meta items.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..annotations import Directive, ParseError, Span, SpecItem, parse_spec_comment
from ..errors import UnsupportedConstruct
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
from .storage import build_storage_map

#: Opcodes of the modeled EVM fragment, recognized as builtin callees.
OPCODES = frozenset(
    {
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
        "sload",
        "sstore",
        "mload",
        "mstore",
        "caller",
        "timestamp",
        "revert",
        "call",
    }
)

#: Storage accessor intrinsics (see storage.ACCESSORS).
STORAGE_INTRINSICS = frozenset(
    {"map_get", "map_set", "map2_get", "map2_set", "arr_get", "arr_set", "arr_len", "arr_push"}
)

BUILTINS = OPCODES | STORAGE_INTRINSICS

_KEYWORDS = frozenset({"function", "let", "if", "switch", "case", "default", "for", "break", "leave"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>/\*.*?\*/|//[^\n]*)
  | (?P<hex>0x[0-9a-fA-F_]+)
  | (?P<num>\d+)
  | (?P<op>:=|->|[(){},])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE | re.DOTALL,
)

_STORAGE_LINE_RE = re.compile(r"@storage\s+([A-Za-z_][A-Za-z0-9_]*)\s*:\s*([^\n*]+)")


@dataclass
class _Tok:
    kind: str  # ws/comment handled in lexing; stream holds comment/hex/num/op/ident/eof
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if not m:
            raise ParseError(f"unexpected character {src[i]!r}", line, col)
        kind = m.lastgroup or ""
        text = m.group()
        if kind not in ("ws",):
            toks.append(_Tok(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    # -- token plumbing ----------------------------------------------------
    def peek(self, skip_comments: bool = True) -> _Tok:
        pos = self.pos
        while skip_comments and self.toks[pos].kind == "comment":
            pos += 1
        return self.toks[pos]

    def next(self, skip_comments: bool = True) -> _Tok:
        while skip_comments and self.toks[self.pos].kind == "comment":
            self.pos += 1
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def pending_comments(self) -> list[_Tok]:
        """Consume any comment tokens at the cursor and return them."""
        out = []
        while self.toks[self.pos].kind == "comment":
            out.append(self.toks[self.pos])
            self.pos += 1
        return out

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return tok

    # -- unit --------------------------------------------------------------
    def unit(self, source: str = "") -> YulUnit:
        decls: list[tuple[str, str]] = []
        meta: list[SpecItem] = []
        funcs: list[YulFunc] = []
        hoisted: list[YulFunc] = []
        while True:
            comments = self.pending_comments()
            items: list[SpecItem] = []
            for c in comments:
                decls.extend(self._storage_lines(c))
                items.extend(_spec_items(c))
            tok = self.peek()
            if tok.kind == "eof":
                meta.extend(i for i in items if i.directive == Directive.META)
                _reject_dangling(items)
                break
            if tok.text != "function":
                raise ParseError(f"expected function definition, found {tok.text!r}", tok.line, tok.col)
            meta.extend(i for i in items if i.directive == Directive.META)
            fn_specs = [i for i in items if i.directive != Directive.META]
            for item in fn_specs:
                if item.directive in (Directive.INV, Directive.LEARN):
                    raise ParseError(
                        f"@{item.directive.value} binds to a loop, not a function",
                        item.span.line,
                        item.span.col,
                    )
            fn = self.function(fn_specs, hoisted)
            funcs.append(fn)
        funcs.extend(hoisted)
        names = [f.name for f in funcs]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ParseError(f"duplicate function definition: {sorted(dup)[0]}", 0, 0)
        layout = build_storage_map(decls)
        return YulUnit(funcs, layout, meta, source)

    def _storage_lines(self, c: _Tok) -> list[tuple[str, str]]:
        return [(m.group(1), m.group(2).strip()) for m in _STORAGE_LINE_RE.finditer(c.text)]

    # -- functions ---------------------------------------------------------
    def function(self, specs: list[SpecItem], hoisted: list[YulFunc]) -> YulFunc:
        kw = self.expect("function")
        name = self.next()
        if name.kind != "ident" or name.text in _KEYWORDS:
            raise ParseError("expected function name", name.line, name.col)
        self.expect("(")
        params: list[str] = []
        if self.peek().text != ")":
            while True:
                p = self.next()
                if p.kind != "ident":
                    raise ParseError("expected parameter name", p.line, p.col)
                params.append(p.text)
                if self.peek().text == ",":
                    self.next()
                else:
                    break
        self.expect(")")
        ret: Optional[str] = None
        if self.peek().text == "->":
            self.next()
            r = self.next()
            if r.kind != "ident":
                raise ParseError("expected return variable", r.line, r.col)
            ret = r.text
            if self.peek().text == ",":
                tok = self.peek()
                raise UnsupportedConstruct(
                    f"multiple return values not supported (line {tok.line})"
                )
        body = self.block(hoisted)
        return YulFunc(name.text, params, ret, body, specs, kw.span)

    # -- statements --------------------------------------------------------
    def block(self, hoisted: list[YulFunc]) -> Block:
        open_tok = self.expect("{")
        stmts: list[Stmt] = []
        while True:
            comments = self.pending_comments()
            items: list[SpecItem] = []
            for c in comments:
                items.extend(_spec_items(c))
            tok = self.peek()
            if tok.text == "}":
                _reject_dangling(items)
                self.next()
                return Block(stmts, open_tok.span)
            if tok.kind == "eof":
                raise ParseError("unterminated block", tok.line, tok.col)
            stmts.extend(self.statement(items, hoisted))

    def statement(self, items: list[SpecItem], hoisted: list[YulFunc]) -> list[Stmt]:
        """Parse one statement; `items` are annotations bound to it."""
        out: list[Stmt] = []
        loop_specs: list[SpecItem] = []
        for item in items:
            if item.directive in (Directive.ASSERT, Directive.ASSUME):
                out.append(SpecStmt(item, item.span))
            elif item.directive in (Directive.INV, Directive.LEARN):
                loop_specs.append(item)
            else:
                raise ParseError(
                    f"@{item.directive.value} cannot bind to a statement",
                    item.span.line,
                    item.span.col,
                )
        tok = self.peek()
        if loop_specs and tok.text != "for":
            bad = loop_specs[0]
            raise ParseError(
                f"@{bad.directive.value} must precede a for loop", bad.span.line, bad.span.col
            )
        if tok.text == "{":
            # Nested plain block: flatten its statements (no shadowing in the
            # restricted fragment).
            inner = self.block(hoisted)
            out.extend(inner.stmts)
            return out
        if tok.text == "function":
            fn = self.function([], hoisted)
            hoisted.append(fn)
            return out
        if tok.text == "let":
            self.next()
            name = self.next()
            if name.kind != "ident":
                raise ParseError("expected variable name", name.line, name.col)
            self.expect(":=")
            out.append(Let(name.text, self.expression(), tok.span))
            return out
        if tok.text == "if":
            self.next()
            cond = self.expression()
            out.append(If(cond, self.block(hoisted), tok.span))
            return out
        if tok.text == "switch":
            self.next()
            scrut = self.expression()
            cases: list[tuple[int, Block]] = []
            default: Optional[Block] = None
            while self.peek().text == "case":
                self.next()
                lit = self.next()
                if lit.kind not in ("num", "hex"):
                    raise ParseError("case label must be a literal", lit.line, lit.col)
                value = int(lit.text.replace("_", ""), 0)
                if any(v == value for v, _ in cases):
                    raise ParseError(f"duplicate case label {lit.text}", lit.line, lit.col)
                cases.append((value, self.block(hoisted)))
            if self.peek().text == "default":
                self.next()
                default = self.block(hoisted)
            if not cases and default is None:
                raise ParseError("switch needs at least one case or default", tok.line, tok.col)
            out.append(Switch(scrut, cases, default, tok.span))
            return out
        if tok.text == "for":
            self.next()
            init = self.block(hoisted)
            cond = self.expression()
            post = self.block(hoisted)
            body = self.block(hoisted)
            out.append(For(init, cond, post, body, loop_specs, tok.span))
            return out
        if tok.text == "break":
            self.next()
            out.append(Break(tok.span))
            return out
        if tok.text == "leave":
            self.next()
            out.append(Leave(tok.span))
            return out
        # Assignment or expression statement.
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            nxt = self._lookahead_after_ident()
            if nxt == ":=":
                name = self.next()
                self.expect(":=")
                out.append(Assign(name.text, self.expression(), tok.span))
                return out
        expr = self.expression()
        if not isinstance(expr, Call):
            raise ParseError("expression statement must be a call", tok.line, tok.col)
        out.append(ExprStmt(expr, tok.span))
        return out

    def _lookahead_after_ident(self) -> str:
        pos = self.pos
        while self.toks[pos].kind == "comment":
            pos += 1
        pos += 1
        while self.toks[pos].kind == "comment":
            pos += 1
        return self.toks[pos].text

    # -- expressions -------------------------------------------------------
    def expression(self) -> Expr:
        tok = self.next()
        if tok.kind in ("num", "hex"):
            return Num(int(tok.text.replace("_", ""), 0), tok.span)
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            if self.peek().text == "(":
                self.next()
                args: list[Expr] = []
                if self.peek().text != ")":
                    while True:
                        args.append(self.expression())
                        if self.peek().text == ",":
                            self.next()
                        else:
                            break
                self.expect(")")
                return Call(tok.text, tuple(args), tok.span)
            return Var(tok.text, tok.span)
        raise ParseError(f"unexpected token {tok.text or 'end of input'!r}", tok.line, tok.col)


def _spec_items(c: _Tok) -> list[SpecItem]:
    text = _STORAGE_LINE_RE.sub(lambda m: " " * len(m.group(0)), c.text)
    if "@" not in text:
        return []
    return parse_spec_comment(text, c.line)


def _reject_dangling(items: list[SpecItem]) -> None:
    for item in items:
        if item.directive != Directive.META:
            raise ParseError(
                f"@{item.directive.value} does not bind to any construct",
                item.span.line,
                item.span.col,
            )


def parse_unit(src: str, source_name: str = "<unit>") -> YulUnit:
    """Parse a source unit."""
    return _Parser(_lex(src)).unit(source_name)
