"""First-order terms for verification conditions.

Three sorts: mathematical integers (INT), booleans (BOOL), and integer arrays
(ARR, total maps Int -> Int) used for mapping/array storage slots and memory.
Terms are immutable; substitution is by symbol name and capture is avoided by
construction (bound variables are always freshly named `?`-prefixed names that
never appear in substitution maps).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

INT = "Int"
BOOL = "Bool"
ARR = "Arr"

# Operators with fixed interpretation.  Arity and argument sorts are enforced
# loosely (construction sites are trusted; emission re-checks sorts).
_INT_OPS = {"+", "-", "*", "div", "neg"}
_CMP_OPS = {"<", "<=", ">", ">=", "="}
_BOOL_OPS = {"not", "and", "or", "=>"}


class Term:
    """Base class; all nodes are frozen dataclasses below."""

    sort: str

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class IntVal(Term):
    value: int
    sort: str = field(default=INT, init=False)


@dataclass(frozen=True)
class BoolVal(Term):
    value: bool
    sort: str = field(default=BOOL, init=False)


@dataclass(frozen=True)
class Sym(Term):
    """A rigid constant (program cell snapshot, havoc symbol, or bound var)."""

    name: str
    sort: str


@dataclass(frozen=True)
class App(Term):
    """Application of an interpreted operator."""

    op: str
    args: tuple[Term, ...]
    sort: str


@dataclass(frozen=True)
class UApp(Term):
    """Application of an uninterpreted function or predicate."""

    name: str
    args: tuple[Term, ...]
    sort: str


@dataclass(frozen=True)
class Ite(Term):
    cond: Term
    then: Term
    other: Term
    sort: str


@dataclass(frozen=True)
class Quant(Term):
    kind: str  # "forall" | "exists"
    binders: tuple[tuple[str, str], ...]  # (name, sort)
    body: Term
    sort: str = field(default=BOOL, init=False)


@dataclass(frozen=True)
class Labeled(Term):
    """Transparent wrapper marking a proof goal; stripped by the splitter."""

    tag: object
    body: Term
    sort: str = field(default=BOOL, init=False)


TRUE = BoolVal(True)
FALSE = BoolVal(False)
ZERO = IntVal(0)
ONE = IntVal(1)


def num(v: int) -> Term:
    return IntVal(int(v))


def sym(name: str, sort: str = INT) -> Sym:
    return Sym(name, sort)


def _flat(op: str, args: Iterator[Term]) -> list[Term]:
    out: list[Term] = []
    for a in args:
        if isinstance(a, App) and a.op == op:
            out.extend(a.args)
        else:
            out.append(a)
    return out


def conj(*args: Term) -> Term:
    parts = [a for a in _flat("and", iter(args)) if a != TRUE]
    if any(a == FALSE for a in parts):
        return FALSE
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return App("and", tuple(parts), BOOL)


def disj(*args: Term) -> Term:
    parts = [a for a in _flat("or", iter(args)) if a != FALSE]
    if any(a == TRUE for a in parts):
        return TRUE
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return App("or", tuple(parts), BOOL)


def neg(a: Term) -> Term:
    if a == TRUE:
        return FALSE
    if a == FALSE:
        return TRUE
    if isinstance(a, App) and a.op == "not":
        return a.args[0]
    return App("not", (a,), BOOL)


def implies(a: Term, b: Term) -> Term:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    return App("=>", (a, b), BOOL)


def eq(a: Term, b: Term) -> Term:
    return App("=", (a, b), BOOL)


def lt(a: Term, b: Term) -> Term:
    return App("<", (a, b), BOOL)


def le(a: Term, b: Term) -> Term:
    return App("<=", (a, b), BOOL)


def gt(a: Term, b: Term) -> Term:
    return App(">", (a, b), BOOL)


def ge(a: Term, b: Term) -> Term:
    return App(">=", (a, b), BOOL)


def add(*args: Term) -> Term:
    return App("+", tuple(args), INT)


def sub(a: Term, b: Term) -> Term:
    return App("-", (a, b), INT)


def mul(*args: Term) -> Term:
    return App("*", tuple(args), INT)


def idiv(a: Term, b: Term) -> Term:
    return App("div", (a, b), INT)


def ite(c: Term, t: Term, e: Term) -> Term:
    if c == TRUE:
        return t
    if c == FALSE:
        return e
    return Ite(c, t, e, t.sort)


def select(arr: Term, idx: Term) -> Term:
    return App("select", (arr, idx), INT)


def store(arr: Term, idx: Term, val: Term) -> Term:
    return App("store", (arr, idx, val), ARR)


def forall(binders, body: Term) -> Term:
    return Quant("forall", tuple(binders), body)


def exists(binders, body: Term) -> Term:
    return Quant("exists", tuple(binders), body)


def truthy(t: Term) -> Term:
    """Word-valued term as proposition: nonzero."""
    if t.sort == BOOL:
        return t
    return neg(eq(t, ZERO))


def bool_word(p: Term) -> Term:
    """Proposition as word: 1/0."""
    if p.sort == INT:
        return p
    return ite(p, ONE, ZERO)


def free_syms(t: Term) -> set[Sym]:
    out: set[Sym] = set()

    def walk(node: Term, bound: frozenset[str]) -> None:
        if isinstance(node, Sym):
            if node.name not in bound:
                out.add(node)
        elif isinstance(node, (IntVal, BoolVal)):
            pass
        elif isinstance(node, App):
            for a in node.args:
                walk(a, bound)
        elif isinstance(node, UApp):
            for a in node.args:
                walk(a, bound)
        elif isinstance(node, Ite):
            walk(node.cond, bound)
            walk(node.then, bound)
            walk(node.other, bound)
        elif isinstance(node, Quant):
            inner = bound | frozenset(n for n, _ in node.binders)
            walk(node.body, inner)
        elif isinstance(node, Labeled):
            walk(node.body, bound)
        else:  # pragma: no cover
            raise TypeError(f"unknown term node {node!r}")

    walk(t, frozenset())
    return out


def uapps(t: Term) -> set[tuple[str, tuple[str, ...], str]]:
    """Uninterpreted applications as (name, arg sorts, result sort)."""
    out: set[tuple[str, tuple[str, ...], str]] = set()

    def walk(node: Term) -> None:
        if isinstance(node, UApp):
            out.add((node.name, tuple(a.sort for a in node.args), node.sort))
            for a in node.args:
                walk(a)
        elif isinstance(node, App):
            for a in node.args:
                walk(a)
        elif isinstance(node, Ite):
            walk(node.cond), walk(node.then), walk(node.other)
        elif isinstance(node, Quant):
            walk(node.body)
        elif isinstance(node, Labeled):
            walk(node.body)

    walk(t)
    return out


def subst(t: Term, mapping: Mapping[str, Term]) -> Term:
    """Simultaneous substitution of free symbols by name."""
    if not mapping:
        return t

    def walk(node: Term, shadow: frozenset[str]) -> Term:
        if isinstance(node, Sym):
            if node.name in mapping and node.name not in shadow:
                return mapping[node.name]
            return node
        if isinstance(node, (IntVal, BoolVal)):
            return node
        if isinstance(node, App):
            args = tuple(walk(a, shadow) for a in node.args)
            return node if args == node.args else App(node.op, args, node.sort)
        if isinstance(node, UApp):
            args = tuple(walk(a, shadow) for a in node.args)
            return node if args == node.args else UApp(node.name, args, node.sort)
        if isinstance(node, Ite):
            c, th, el = walk(node.cond, shadow), walk(node.then, shadow), walk(node.other, shadow)
            if (c, th, el) == (node.cond, node.then, node.other):
                return node
            return Ite(c, th, el, node.sort)
        if isinstance(node, Quant):
            inner = shadow | frozenset(n for n, _ in node.binders)
            body = walk(node.body, inner)
            return node if body is node.body else Quant(node.kind, node.binders, body)
        if isinstance(node, Labeled):
            body = walk(node.body, shadow)
            return node if body is node.body else Labeled(node.tag, body)
        raise TypeError(f"unknown term node {node!r}")  # pragma: no cover

    return walk(t, frozenset())


def render(t: Term) -> str:
    """S-expression rendering (also the SMT-LIB2 term syntax)."""
    if isinstance(t, IntVal):
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    if isinstance(t, BoolVal):
        return "true" if t.value else "false"
    if isinstance(t, Sym):
        return t.name
    if isinstance(t, App):
        return "(" + " ".join([t.op] + [render(a) for a in t.args]) + ")"
    if isinstance(t, UApp):
        if not t.args:
            return t.name
        return "(" + " ".join([t.name] + [render(a) for a in t.args]) + ")"
    if isinstance(t, Ite):
        return f"(ite {render(t.cond)} {render(t.then)} {render(t.other)})"
    if isinstance(t, Quant):
        bs = " ".join(f"({n} {_smt_sort(s)})" for n, s in t.binders)
        return f"({t.kind} ({bs}) {render(t.body)})"
    if isinstance(t, Labeled):
        return render(t.body)
    raise TypeError(f"unknown term node {t!r}")  # pragma: no cover


def _smt_sort(sort: str) -> str:
    if sort == ARR:
        return "(Array Int Int)"
    if sort in (INT, BOOL):
        return sort
    raise ValueError(f"unknown sort {sort}")


@dataclass
class ArrayVal:
    """A concrete array model value: default plus exceptional entries."""

    default: int = 0
    entries: dict[int, int] = field(default_factory=dict)

    def get(self, idx: int) -> int:
        return self.entries.get(idx, self.default)

    def set(self, idx: int, val: int) -> "ArrayVal":
        new = dict(self.entries)
        new[idx] = val
        return ArrayVal(self.default, new)


def eval_term(t: Term, env: Mapping[str, object]):
    """Evaluate a closed-under-env term to int/bool/ArrayVal.

    Used to validate counterexample models against negated goals.  Quantified
    subterms are not evaluated (raises ValueError) — model validation applies
    to quantifier-free goals.
    """
    if isinstance(t, IntVal):
        return t.value
    if isinstance(t, BoolVal):
        return t.value
    if isinstance(t, Sym):
        if t.name not in env:
            raise KeyError(f"no model value for {t.name}")
        return env[t.name]
    if isinstance(t, Labeled):
        return eval_term(t.body, env)
    if isinstance(t, Ite):
        return eval_term(t.then if eval_term(t.cond, env) else t.other, env)
    if isinstance(t, Quant):
        raise ValueError("cannot evaluate quantified term against a model")
    if isinstance(t, UApp):
        fn = env.get(t.name)
        if callable(fn):
            return fn(*[eval_term(a, env) for a in t.args])
        raise KeyError(f"no model interpretation for {t.name}")
    assert isinstance(t, App)
    args = [eval_term(a, env) for a in t.args]
    op = t.op
    if op == "+":
        return sum(args)
    if op == "-":
        return args[0] - args[1] if len(args) == 2 else -args[0]
    if op == "neg":
        return -args[0]
    if op == "*":
        out = 1
        for a in args:
            out *= a
        return out
    if op == "div":
        a, b = args
        if b == 0:
            raise ZeroDivisionError("div by zero in model evaluation")
        # SMT-LIB euclidean division.
        q = Fraction(a, b)
        import math

        qf = math.floor(q) if b > 0 else math.ceil(q)
        return qf
    if op == "<":
        return args[0] < args[1]
    if op == "<=":
        return args[0] <= args[1]
    if op == ">":
        return args[0] > args[1]
    if op == ">=":
        return args[0] >= args[1]
    if op == "=":
        a, b = args
        if isinstance(a, ArrayVal) or isinstance(b, ArrayVal):
            raise ValueError("array extensional equality not evaluated")
        return a == b
    if op == "not":
        return not args[0]
    if op == "and":
        return all(args)
    if op == "or":
        return any(args)
    if op == "=>":
        return (not args[0]) or args[1]
    if op == "select":
        arr, idx = args
        assert isinstance(arr, ArrayVal)
        return arr.get(idx)
    if op == "store":
        arr, idx, val = args
        assert isinstance(arr, ArrayVal)
        return arr.set(idx, val)
    raise ValueError(f"unknown op {op}")  # pragma: no cover
