"""Polynomial loop-invariant inference from execution traces.

Candidate invariants are polynomial identities p(x̄) = 0 over the watched
variables.  Fitting builds the monomial-evaluation matrix of every trace row
over the graded-lex monomial basis up to a degree bound and extracts an exact
rational nullspace basis (Fraction arithmetic throughout — no floating
point).  Each nullspace vector, normalized to a primitive integer vector with
positive leading coefficient, is a candidate invariant that vanishes on every
recorded row.

Runs with too few distinct rows underdetermine the system and produce
overfit candidates; callers concatenate rows from multiple runs with
different parameters before fitting.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from math import gcd
from typing import Iterable, Sequence, Union

from .annotations import Arith, Cmp, Form, Ident, Lit, Pow
from .interp import Trace


def monomial_basis(nvars: int, max_degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors in graded-lex order (degree ascending, then
    lexicographic with earlier variables heavier first)."""
    basis: list[tuple[int, ...]] = []
    for degree in range(max_degree + 1):
        level: list[tuple[int, ...]] = []
        for combo in combinations_with_replacement(range(nvars), degree):
            exps = [0] * nvars
            for var in combo:
                exps[var] += 1
            level.append(tuple(exps))
        level.sort(reverse=True)
        basis.extend(level)
    return basis


def eval_monomial(exps: tuple[int, ...], values: Sequence[int]) -> int:
    out = 1
    for e, v in zip(exps, values):
        if e:
            out *= v**e
    return out


def build_matrix(
    rows: Sequence[Sequence[int]], basis: Sequence[tuple[int, ...]]
) -> list[list[Fraction]]:
    return [[Fraction(eval_monomial(m, row)) for m in basis] for row in rows]


def nullspace(matrix: list[list[Fraction]]) -> list[list[Fraction]]:
    """Exact rational nullspace basis via Gaussian elimination.

    Returns one vector per free column of the reduced row echelon form, in
    column order; for a zero/empty matrix this is the identity-like full
    basis.
    """
    if not matrix:
        return []
    ncols = len(matrix[0])
    m = [list(row) for row in matrix]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot_row = None
        for i in range(r, len(m)):
            if m[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        m[r], m[pivot_row] = m[pivot_row], m[r]
        inv = m[r][c]
        m[r] = [x / inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                factor = m[i][c]
                m[i] = [a - factor * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis: list[list[Fraction]] = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -m[i][fc]
        basis.append(vec)
    return basis


def _normalize(vec: Sequence[Fraction], basis: Sequence[tuple[int, ...]]) -> tuple[int, ...]:
    """Primitive integer vector, positive leading (graded-lex greatest) coeff."""
    denom_lcm = 1
    for x in vec:
        if x != 0:
            denom_lcm = denom_lcm * x.denominator // gcd(denom_lcm, x.denominator)
    ints = [int(x * denom_lcm) for x in vec]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    # Sign: the coefficient of the graded-lex greatest nonzero monomial
    # (highest total degree, earlier variables heavier) is positive.
    lead = 0
    lead_key = None
    for v, exps in zip(ints, basis):
        if v != 0:
            key = (sum(exps), exps)
            if lead_key is None or key > lead_key:
                lead_key = key
                lead = v
    if lead < 0:
        ints = [-v for v in ints]
    return tuple(ints)


@dataclass(frozen=True)
class PolyInvariant:
    """A fitted identity: sum(coeffs[i] * monomial[i]) = 0."""

    variables: tuple[str, ...]
    degree: int
    coeffs: tuple[int, ...]

    @property
    def basis(self) -> list[tuple[int, ...]]:
        return monomial_basis(len(self.variables), self.degree)

    def evaluate(self, values: Sequence[int]) -> int:
        return sum(c * eval_monomial(m, values) for c, m in zip(self.coeffs, self.basis))

    def residual(self, rows: Iterable[Sequence[int]]) -> int:
        return max((abs(self.evaluate(r)) for r in rows), default=0)

    def as_form(self) -> Form:
        """The invariant as an annotation form `poly = 0`."""
        terms: list[tuple[int, tuple[int, ...]]] = [
            (c, m) for c, m in zip(self.coeffs, self.basis) if c != 0
        ]
        # Print greatest monomial first.
        terms.reverse()
        expr: Form = None  # type: ignore[assignment]
        for coeff, exps in terms:
            mono = self._mono_form(exps)
            mag = abs(coeff)
            if mono is None:
                piece: Form = Lit(mag)
            elif mag == 1:
                piece = mono
            else:
                piece = Arith("*", Lit(mag), mono)
            if expr is None:
                expr = piece if coeff > 0 else Arith("-", Lit(0), piece)
            else:
                expr = Arith("+" if coeff > 0 else "-", expr, piece)
        if expr is None:
            expr = Lit(0)
        return Cmp("=", expr, Lit(0))

    def _mono_form(self, exps: tuple[int, ...]):
        factors: list[Form] = []
        for name, e in zip(self.variables, exps):
            if e == 1:
                factors.append(Ident(name))
            elif e > 1:
                factors.append(Pow(Ident(name), e))
        if not factors:
            return None
        out = factors[0]
        for f in factors[1:]:
            out = Arith("*", out, f)
        return out

    def __str__(self) -> str:
        from .annotations import print_form

        return print_form(self.as_form())


def merge_traces(traces: Union[Trace, Sequence[Trace]]) -> tuple[tuple[str, ...], list[list[int]]]:
    """Concatenate rows from one or more traces of the same watched tuple."""
    if isinstance(traces, Trace):
        traces = [traces]
    if not traces:
        raise ValueError("no traces to fit")
    watched = traces[0].watched
    rows: list[list[int]] = []
    for tr in traces:
        if tr.watched != watched:
            raise ValueError(f"mismatched watched tuples {tr.watched} vs {watched}")
        rows.extend(list(vals) for _, vals in tr.rows)
    return watched, rows


def fit_invariants(
    trace: Union[Trace, Sequence[Trace]], max_degree: int = 3
) -> list[PolyInvariant]:
    """Fit candidate polynomial invariants to trace rows.

    Returns one candidate per nullspace basis vector (possibly empty); every
    candidate has exactly zero residual on the fitted rows.
    """
    watched, rows = merge_traces(trace)
    if not rows:
        return []
    basis = monomial_basis(len(watched), max_degree)
    matrix = build_matrix(rows, basis)
    out = []
    for vec in nullspace(matrix):
        coeffs = _normalize(vec, basis)
        inv = PolyInvariant(watched, max_degree, coeffs)
        assert inv.residual(rows) == 0, "nullspace vector must vanish on fitted rows"
        out.append(inv)
    return out


def validate_invariant(unit, fn_name: str, invariant: PolyInvariant, config=None):
    """Install the invariant on the function's @learn loop and solve its
    initiation/consecution obligations.  Delegates to the pipeline."""
    from .pipeline import validate_fitted_invariant

    return validate_fitted_invariant(unit, fn_name, invariant, config)
