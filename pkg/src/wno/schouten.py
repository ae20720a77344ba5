"""Weakly nonlocal operators, their encoding as degree-2 values, and the
variational bracket test for the Poisson property.

An operator is an n x n matrix of finite-order differential-operator
entries plus tail summands ``e * w d^(-1) z`` with rational constants e and
vectors w, z of rational-function coefficients.  The encoding sends a local
entry ``c d^k`` in slot (i, j) to ``c * p_i p_j[k]`` and each tail to
``e * (sum_i w_i p_i) * v`` for a nonlocal variable v whose density is
``sum_j z_j p_j``.

The bracket of two operator encodings is computed slot-wise from their
variational-derivative tuples,

    [P, Q] = sum_i dP/du_i * dQ/dp_i + dQ/du_i * dP/dp_i ,

which is the symmetric bilinear form that the self-bracket formula
``[P, P] = 2 sum_i dP/du_i dP/dp_i`` polarizes to.  The operator is
Poisson exactly when it is skew-adjoint and the bracket value is a total
x-derivative, certified by a vanishing variational-derivative tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import sympy as sp

from .algebra import (
    Expr,
    Fields,
    SuperPoly,
    as_coeff,
    coeff_is_zero,
    p,
    render_factor,
)
from .jetcalc import ELResult
from .nonlocal_vars import NonlocalVarTable, el_nonlocal, scalar_content

DiffRow = list[tuple[Expr, int]]  # sum of coefficient * d^order


@dataclass(frozen=True)
class Tail:
    """One weakly nonlocal summand e * w d^(-1) z."""

    constant: Expr
    left: tuple[Expr, ...]
    right: tuple[Expr, ...]


@dataclass
class WNOperator:
    """Matrix differential operator with weakly nonlocal tails."""

    fields: Fields
    local: list[list[DiffRow]]
    tails: list[Tail] = field(default_factory=list)

    def __post_init__(self):
        n = self.fields.n
        if len(self.local) != n or any(len(row) != n for row in self.local):
            raise ValueError(f"local part must be an {n}x{n} matrix of rows")
        for tail in self.tails:
            if len(tail.left) != n or len(tail.right) != n:
                raise ValueError("tail vectors must have one entry per field")
            if not as_coeff(tail.constant).is_Rational:
                raise ValueError("tail constants must be rational numbers")

    @property
    def n(self) -> int:
        return self.fields.n

    def entry(self, i: int, j: int) -> DiffRow:
        return self.local[i - 1][j - 1]

    def merged_entry(self, i: int, j: int) -> DiffRow:
        by_order: dict[int, Expr] = {}
        for coeff, order in self.entry(i, j):
            by_order[order] = by_order.get(order, sp.Integer(0)) + coeff
        out = []
        for order in sorted(by_order):
            c = sp.cancel(by_order[order])
            if c != 0:
                out.append((c, order))
        return out

    def __add__(self, other: "WNOperator") -> "WNOperator":
        if self.fields != other.fields:
            raise ValueError("operators live over different field sets")
        local = [
            [self.local[i][j] + other.local[i][j] for j in range(self.n)]
            for i in range(self.n)
        ]
        return WNOperator(self.fields, local, self.tails + other.tails)

    def scale(self, value) -> "WNOperator":
        c = as_coeff(value)
        local = [
            [[(c * k, o) for k, o in row] for row in rows] for rows in self.local
        ]
        tails = [Tail(c * t.constant, t.left, t.right) for t in self.tails]
        return WNOperator(self.fields, local, tails)


def zero_operator(fields: Fields) -> WNOperator:
    n = fields.n
    return WNOperator(fields, [[[] for _ in range(n)] for _ in range(n)])


def operator_adjoint(P: WNOperator) -> WNOperator:
    """Formal adjoint: entries transposed through (c d^k)* = (-1)^k d^k c,
    tails through (w d^(-1) z)* = -z d^(-1) w."""
    n = P.n
    local: list[list[DiffRow]] = [[[] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for coeff, order in P.local[j][i]:
                for m in range(order + 1):
                    c = _dx_pow(coeff, order - m, P.fields)
                    local[i][j].append(
                        ((-1) ** order * comb(order, m) * c, m)
                    )
    tails = [Tail(-t.constant, t.right, t.left) for t in P.tails]
    return WNOperator(P.fields, local, tails)


def _dx_pow(coeff: Expr, order: int, fields: Fields) -> Expr:
    out = coeff
    for _ in range(order):
        acc = sp.Integer(0)
        for sym, idx, k in fields.jet_symbols(out):
            d = sp.diff(out, sym)
            if d != 0:
                acc = acc + d * fields.jet(idx, k + 1)
        out = acc
    return out


def skew_part(P: WNOperator) -> WNOperator:
    return (P + operator_adjoint(P).scale(-1)).scale(sp.Rational(1, 2))


def _primed(expr: Expr, fields: Fields) -> Expr:
    subs = {}
    for sym, _, _ in fields.jet_symbols(expr):
        subs[sym] = sp.Symbol(sym.name + "__y")
    return expr.xreplace(subs)


def tail_kernel(tails: list[Tail], fields: Fields) -> list[list[Expr]]:
    """Integral-kernel matrix of a tail sum, with independent copies of the
    jet variables in the two slots; two tail lists act identically exactly
    when their kernels agree entry-wise."""
    n = fields.n
    K = [[sp.Integer(0) for _ in range(n)] for _ in range(n)]
    for t in tails:
        for i in range(n):
            for j in range(n):
                K[i][j] = K[i][j] + t.constant * t.left[i] * _primed(
                    t.right[j], fields
                )
    return K


def operators_equal(P: WNOperator, Q: WNOperator) -> bool:
    diff = P + Q.scale(-1)
    for i in range(1, diff.n + 1):
        for j in range(1, diff.n + 1):
            if diff.merged_entry(i, j):
                return False
    K = tail_kernel(diff.tails, diff.fields)
    return all(coeff_is_zero(k) for row in K for k in row)


@dataclass
class SkewResult:
    ok: bool
    witness: str | None = None


def skew_check(P: WNOperator) -> SkewResult:
    """Test P + P* == 0; the witness is the first nonzero entry found."""
    total = P + operator_adjoint(P)
    for i in range(1, total.n + 1):
        for j in range(1, total.n + 1):
            row = total.merged_entry(i, j)
            if row:
                coeff, order = row[0]
                return SkewResult(False, f"local[{i},{j}]: {coeff} * D^{order}")
    K = tail_kernel(total.tails, total.fields)
    for i in range(total.n):
        for j in range(total.n):
            if not coeff_is_zero(K[i][j]):
                return SkewResult(
                    False, f"tail kernel [{i + 1},{j + 1}]: {sp.cancel(K[i][j])}"
                )
    return SkewResult(True)


def to_superfunction(P: WNOperator, table: NonlocalVarTable) -> SuperPoly:
    """Encode an operator as a degree-2 value, registering tail variables."""
    out = SuperPoly.zero()
    for i in range(1, P.n + 1):
        for j in range(1, P.n + 1):
            for coeff, order in P.entry(i, j):
                out = out + SuperPoly.monomial(coeff, [p(i, 0), p(j, order)])
    for tail in P.tails:
        density = SuperPoly.from_terms(
            [(tail.right[j - 1], [p(j, 0)]) for j in range(1, P.n + 1)]
        )
        if density.is_zero():
            continue
        content, reduced = scalar_content(density)
        ident = table.register(reduced, note="operator tail")
        v = SuperPoly.factor(table.factor(ident))
        W = SuperPoly.from_terms(
            [(tail.left[i - 1], [p(i, 0)]) for i in range(1, P.n + 1)]
        )
        out = out + (W * v).scale(tail.constant * content)
    return out


def from_superfunction(S: SuperPoly, fields: Fields, table: NonlocalVarTable) -> WNOperator:
    """Inverse reading of the encoding, via the odd-slot variational tuple.

    Half the odd-slot variational derivative of the encoding of P equals
    the skew part of P applied to the dual factors, so reading off the
    coefficients per factor reconstructs exactly skew(P).
    """
    comp = el_nonlocal(S, fields, table)
    n = fields.n
    local: list[list[DiffRow]] = [[[] for _ in range(n)] for _ in range(n)]
    tail_vectors: dict[int, list[Expr]] = {}
    for i in range(1, n + 1):
        v = comp.el.dp[i - 1].scale(sp.Rational(1, 2)).canonical()
        for word, coeff in v.terms.items():
            if len(word) == 1 and word[0].kind == "p":
                f = word[0]
                local[i - 1][f.index - 1].append((coeff, f.order))
            elif len(word) == 1 and word[0].kind == "nl":
                vec = tail_vectors.setdefault(
                    word[0].index, [sp.Integer(0)] * n
                )
                vec[i - 1] = vec[i - 1] + coeff
            elif len(word) == 0:
                if not coeff_is_zero(coeff):
                    raise ValueError("degree-0 component cannot come from an operator")
            else:
                raise ValueError(f"unexpected word {word} in operator reading")
    tails = []
    for ident, vec in sorted(tail_vectors.items()):
        density = table.density(ident)
        dvec = [sp.Integer(0)] * n
        for word, coeff in density.terms.items():
            if len(word) != 1 or word[0].kind != "p" or word[0].order != 0:
                raise ValueError("tail density is not a zeroth-order covector")
            dvec[word[0].index - 1] = coeff
        tails.append(Tail(sp.Integer(1), tuple(vec), tuple(dvec)))
    return WNOperator(fields, local, tails)


@dataclass
class BracketOutcome:
    """Result of one bracket computation."""

    three_vector: SuperPoly
    el: ELResult
    trivial: bool
    independence_assumed: bool
    coefficient_report: list[dict]
    warnings: list[str] = field(default_factory=list)


def _coefficient_report(el: ELResult, fields: Fields, table: NonlocalVarTable) -> list[dict]:
    names = table.names()
    report = []
    for slot, parts in (("du", el.du), ("dp", el.dp)):
        for i, part in enumerate(parts, start=1):
            canon = part.canonical()
            for word, coeff in canon.sorted_terms():
                monomial = "*".join(
                    render_factor(f, fields, names) for f in word
                ) or "1"
                report.append(
                    {
                        "component": f"{slot}[{i}]",
                        "monomial": monomial,
                        "coefficient": str(coeff),
                    }
                )
    return report


def schouten_bracket(
    P: WNOperator, Q: WNOperator, table: NonlocalVarTable | None = None
) -> BracketOutcome:
    """Bracket of two operator encodings, with the divergence-triviality test.

    Operators failing the skew test are not rejected: the encoding only
    sees the skew part, and a warning is attached instead.
    """
    if P.fields != Q.fields:
        raise ValueError("operators live over different field sets")
    fields = P.fields
    if table is None:
        table = NonlocalVarTable()
    warnings = []
    for name, op in (("first", P), ("second", Q)):
        res = skew_check(op)
        if not res.ok:
            warnings.append(
                f"{name} operator is not skew-adjoint ({res.witness}); "
                "only its skew part enters the bracket"
            )
    SP = to_superfunction(P, table)
    elP = el_nonlocal(SP, fields, table)
    if Q is P:
        SQ, elQ = SP, elP
    else:
        SQ = to_superfunction(Q, table)
        elQ = el_nonlocal(SQ, fields, table)

    three = SuperPoly.zero()
    for i in range(fields.n):
        three = three + elP.el.du[i] * elQ.el.dp[i] + elQ.el.du[i] * elP.el.dp[i]
    three = three.canonical()

    elT = el_nonlocal(three, fields, table)
    trivial = elT.el.is_zero()
    report = [] if trivial else _coefficient_report(elT.el, fields, table)
    return BracketOutcome(
        three_vector=three,
        el=elT.el,
        trivial=trivial,
        independence_assumed=elP.formal_used or elQ.formal_used or elT.formal_used,
        coefficient_report=report,
        warnings=warnings,
    )


@dataclass
class HamiltonianResult:
    skew: SkewResult
    bracket: BracketOutcome
    ok: bool


def is_hamiltonian(P: WNOperator, table: NonlocalVarTable | None = None) -> HamiltonianResult:
    """Poisson-property verdict: skew-adjointness and a trivial self-bracket."""
    if table is None:
        table = NonlocalVarTable()
    skew = skew_check(P)
    bracket = schouten_bracket(P, P, table)
    return HamiltonianResult(skew=skew, bracket=bracket, ok=skew.ok and bracket.trivial)
