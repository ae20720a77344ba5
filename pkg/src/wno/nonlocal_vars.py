"""Formal nonlocal variables and the tail-aware variational calculus.

A nonlocal variable stands for an x-antiderivative of an odd density.  The
table records each variable's defining density, nesting level and origin;
registration deduplicates on the normalized density, so the antiderivative
of a tail density that is already registered resolves to the existing
variable.

``el_nonlocal`` computes variational-derivative tuples of values whose
terms carry at most two nonlocal factors.  For a term A*v with local
prefactor A of odd degree d and nonlocal factor v with defining density Z:

    delta(A v) = sum_k (-1)^k d^k( dA * v ) + (-1)^(d+1) sum_k (-1)^k d^k( dZ * a )

slot by slot, where ``a`` is an antiderivative of A: the explicit local one
when the density integrates, otherwise a fresh formal variable.  Terms
B*v*w with two nonlocal factors use the three-part rule

    delta(B v w) = S(B; v w) + S(Z_v; q_w) - S(Z_w; q_v)

with auxiliary antiderivatives q_w of B*w and q_v of B*v (even parity,
usually formal at level 2).  This form is antisymmetric under swapping
the two factors, follows from the same duality argument as the one-tail
rule, and agrees exactly with rewriting the term by depth reduction
whenever the reduction applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .algebra import Expr, Fields, OddFactor, SuperPoly, Word, nl
from .jetcalc import ELResult, total_x, total_x_pow, var_deriv


class UnsupportedStructureError(ValueError):
    """Term shape outside the supported local / one-tail / two-tail forms."""


@dataclass
class NonlocalVar:
    density: SuperPoly
    level: int
    parity: int
    name: str
    formal: bool
    note: str = ""


def _density_key(density: SuperPoly):
    canon = density.canonical()
    return tuple(
        (word, sp.cancel(coeff)) for word, coeff in canon.sorted_terms()
    )


def scalar_content(a: SuperPoly) -> tuple[sp.Rational, SuperPoly]:
    """Split off the leading rational content: ``a == content * reduced``.

    Used before registration so that densities differing by a rational
    multiple share one variable (their antiderivatives are proportional).
    """
    canon = a.canonical()
    if not canon.terms:
        return sp.Integer(1), canon
    _, coeff = canon.sorted_terms()[0]
    lead = coeff.as_ordered_terms()[0]
    content, _ = lead.as_coeff_Mul(rational=True)
    if content == 0:
        content = sp.Integer(1)
    return content, canon.scale(sp.Integer(1) / content)


class NonlocalVarTable:
    """Append-only registry of nonlocal variables."""

    def __init__(self):
        self.entries: dict[int, NonlocalVar] = {}
        self._by_density: dict[object, int] = {}
        self._counts = {"r": 0, "y": 0}

    def register(self, density: SuperPoly, *, formal: bool = False, note: str = "") -> int:
        """Register a defining density, deduplicating on its normal form.

        The density must be homogeneous with at least one odd factor; a
        purely even density has a local antiderivative problem and does not
        define a new variable here.
        """
        canon = density.canonical()
        if canon.is_structurally_zero():
            raise ValueError("cannot register the zero density")
        degrees = canon.odd_degrees()
        if len(degrees) != 1:
            raise ValueError(f"density must be homogeneous; got degrees {sorted(degrees)}")
        degree = degrees.pop()
        if degree == 0:
            raise ValueError("density has no odd factors; integrate it instead")
        key = _density_key(canon)
        if key in self._by_density:
            return self._by_density[key]
        level = 1
        for ident in canon.nonlocal_ids():
            level = max(level, self.entries[ident].level + 1)
        parity = degree % 2
        prefix = "r" if (level == 1 and degree == 1 and not formal) else "y"
        self._counts[prefix] += 1
        ident = len(self.entries) + 1
        self.entries[ident] = NonlocalVar(
            density=canon,
            level=level,
            parity=parity,
            name=f"{prefix}{self._counts[prefix]}",
            formal=formal,
            note=note,
        )
        self._by_density[key] = ident
        return ident

    def density(self, ident: int) -> SuperPoly:
        try:
            return self.entries[ident].density
        except KeyError:
            raise KeyError(f"nonlocal variable {ident} is not registered") from None

    def factor(self, ident: int) -> OddFactor:
        return nl(ident, self.entries[ident].parity)

    def names(self) -> dict[int, str]:
        return {ident: entry.name for ident, entry in self.entries.items()}


@dataclass
class IntegrationResult:
    """Outcome of an explicit antiderivative search.

    On success ``antiderivative`` satisfies total_x(antiderivative) == input
    exactly and ``residual`` is None; on failure ``residual`` carries the
    non-integrable part for reporting.
    """

    antiderivative: SuperPoly | None
    residual: SuperPoly | None

    @property
    def ok(self) -> bool:
        return self.residual is None


def _top_variable(a: SuperPoly, fields: Fields):
    """Highest-order variable of a value: (order, odd?, index, handle)."""
    best = None
    for word, coeff in a.terms.items():
        for f in word:
            if f.kind != "p":
                continue
            key = (f.order, 1, f.index)
            if best is None or key > best[0]:
                best = (key, ("odd", f))
        for sym, idx, order in fields.jet_symbols(coeff):
            key = (order, 0, idx)
            if best is None or key > best[0]:
                best = (key, ("even", sym, idx, order))
    return best


def integrate_density(Y: SuperPoly, fields: Fields, table: NonlocalVarTable | None = None) -> IntegrationResult:
    """Find a local antiderivative of a density, or report failure.

    Exactness is pre-checked cheaply: every local variational derivative of
    an exact density vanishes.  Construction then absorbs the highest-order
    variable into a total derivative and recurses; the result is verified
    by back-substitution.  Densities containing nonlocal factors are not
    integrated explicitly (use depth reduction for those).
    """
    if not Y.is_local():
        return IntegrationResult(None, Y)
    Y = Y.canonical()
    if Y.is_structurally_zero():
        return IntegrationResult(SuperPoly.zero(), None)

    for i in range(1, fields.n + 1):
        for kind in ("even", "odd"):
            if not var_deriv(Y, i, kind, fields).is_zero():
                return IntegrationResult(None, Y)

    eta = SuperPoly.zero()
    remaining = Y
    budget = 40 * (len(Y.terms) + 4)
    while budget > 0:
        budget -= 1
        if remaining.is_structurally_zero():
            break
        top = _top_variable(remaining, fields)
        if top is None or top[0][0] == 0:
            # only order-0 content left; exactness would force it to vanish
            remaining = remaining.canonical()
            if remaining.is_structurally_zero():
                break
            return IntegrationResult(None, remaining)

        if top[1][0] == "odd":
            f = top[1][1]
            lowered = OddFactor("p", f.index, f.order - 1)
            piece: dict[Word, Expr] = {}
            for word, coeff in remaining.terms.items():
                if f not in word:
                    continue
                pos = word.index(f)
                piece[word[:pos] + (lowered,) + word[pos + 1 :]] = coeff
            step = SuperPoly.from_terms(
                [(c, w) for w, c in piece.items()]
            )
        else:
            _, sym, idx, order = top[1]
            lowered_sym = fields.jet(idx, order - 1)
            rows = []
            for word, coeff in remaining.terms.items():
                d = sp.diff(coeff, sym)
                if d == 0:
                    continue
                if sp.diff(d, sym) != 0:
                    return IntegrationResult(None, remaining)
                # antiderivative in the lowered variable, so coefficients
                # like f(u_k) * u_{k+1} absorb into F(u_k) exactly
                g = sp.integrate(d, lowered_sym)
                if g.has(sp.log, sp.atan, sp.atanh, sp.asin, sp.Integral):
                    return IntegrationResult(None, remaining)
                rows.append((g, word))
            step = SuperPoly.from_terms(rows)

        if step.is_structurally_zero():
            return IntegrationResult(None, remaining)
        eta = eta + step
        remaining = (remaining - total_x(step, fields)).canonical()
    else:
        return IntegrationResult(None, remaining)

    if not (total_x(eta, fields) - Y).is_zero():
        return IntegrationResult(None, remaining)
    return IntegrationResult(eta.canonical(), None)


@dataclass
class TailTerm:
    """One summand split as local prefactor times nonlocal suffix."""

    prefactor: SuperPoly
    suffix: tuple[int, ...]

    def as_superpoly(self, table: NonlocalVarTable) -> SuperPoly:
        out = self.prefactor
        for ident in self.suffix:
            out = out * SuperPoly.factor(table.factor(ident))
        return out


def split_tails(a: SuperPoly, table: NonlocalVarTable) -> tuple[SuperPoly, list[TailTerm]]:
    """Separate the local part from tail terms grouped by nonlocal suffix.

    Terms with more than two nonlocal factors, or with an even-parity
    nonlocal factor, fall outside the supported forms.
    """
    local: dict[Word, Expr] = {}
    groups: dict[tuple[int, ...], dict[Word, Expr]] = {}
    for word, coeff in a.terms.items():
        tail = tuple(f for f in word if f.kind == "nl")
        if not tail:
            local[word] = coeff
            continue
        if len(tail) > 2:
            raise UnsupportedStructureError(
                f"term with {len(tail)} nonlocal factors is not supported: {word}"
            )
        if any(f.parity == 0 for f in tail):
            raise UnsupportedStructureError(
                "even-parity nonlocal factors may appear only in results, "
                f"not in inputs: {word}"
            )
        prefix = word[: len(word) - len(tail)]
        ids = tuple(f.index for f in tail)
        groups.setdefault(ids, {})
        groups[ids][prefix] = groups[ids].get(prefix, sp.Integer(0)) + coeff
    terms = [
        TailTerm(SuperPoly(prefix_terms), suffix)
        for suffix, prefix_terms in sorted(groups.items())
    ]
    return SuperPoly(local), terms


@dataclass
class Antiderivative:
    """Antiderivative of a prefactor: explicit local value or formal variable."""

    value: SuperPoly
    formal: bool


def _antiderivative(A: SuperPoly, fields: Fields, table: NonlocalVarTable, note: str) -> Antiderivative:
    content, reduced = scalar_content(A)
    if reduced.is_structurally_zero():
        return Antiderivative(SuperPoly.zero(), False)
    if reduced.is_local():
        result = integrate_density(reduced, fields, table)
        if result.ok:
            return Antiderivative(result.antiderivative.scale(content), False)
    ident = table.register(reduced, formal=True, note=note)
    return Antiderivative(
        SuperPoly.factor(table.factor(ident)).scale(content),
        table.entries[ident].formal,
    )


def _el_sum(A: SuperPoly, fixed: SuperPoly, fields: Fields, table: NonlocalVarTable) -> ELResult:
    """sum_k (-1)^k d^k( (dA/dslot_k) * fixed ), both slots, all fields."""
    n = fields.n
    du = [SuperPoly.zero() for _ in range(n)]
    dp = [SuperPoly.zero() for _ in range(n)]
    for i in range(1, n + 1):
        orders = {
            o
            for coeff in A.terms.values()
            for _, j, o in fields.jet_symbols(coeff)
            if j == i
        }
        for order in orders:
            part = A.partial_even(fields.jet(i, order)) * fixed
            term = total_x_pow(part, order, fields, table)
            du[i - 1] = du[i - 1] + (term if order % 2 == 0 else -term)
    for f in sorted(A.jet_factors(), key=OddFactor.sort_key):
        part = A.partial_odd(f) * fixed
        term = total_x_pow(part, f.order, fields, table)
        dp[f.index - 1] = dp[f.index - 1] + (term if f.order % 2 == 0 else -term)
    return ELResult(tuple(du), tuple(dp))


@dataclass
class ELComputation:
    el: ELResult
    formal_used: bool


def el_nonlocal(a: SuperPoly, fields: Fields, table: NonlocalVarTable) -> ELComputation:
    """Variational-derivative tuple of a value with nonlocal tails.

    Two-tail terms are first rewritten by depth reduction when their
    prefactor integrates explicitly (fewer formal variables means sharper
    verdicts); the symmetric rule with formal antiderivatives is the
    fallback.
    """
    local, tails = split_tails(a, table)
    from .jetcalc import euler_lagrange

    el = euler_lagrange(local, fields)
    formal_used = False

    def single_tail(prefactor: SuperPoly, ident: int) -> None:
        nonlocal el, formal_used
        v = SuperPoly.factor(table.factor(ident))
        Z = table.density(ident)
        for degree in sorted(prefactor.odd_degrees()):
            A = prefactor.degree_part(degree)
            anti = _antiderivative(A, fields, table, note="tail antiderivative")
            formal_used = formal_used or anti.formal
            sign = 1 if (degree + 1) % 2 == 0 else -1
            el = el + _el_sum(A, v, fields, table)
            el = el + _el_sum(Z, anti.value, fields, table).scale(sign)

    for term in tails:
        if term.suffix and not term.prefactor.is_local():
            raise UnsupportedStructureError("tail prefactor must be local")
        if len(term.suffix) == 1:
            single_tail(term.prefactor, term.suffix[0])
            continue

        degrees = term.prefactor.odd_degrees()
        if degrees - {1}:
            raise UnsupportedStructureError(
                "two-tail terms must have an odd-degree-1 prefactor; "
                f"got degrees {sorted(degrees)}"
            )
        reduced, flagged = reduce_depth(term, table, fields)
        if not flagged:
            for t in reduced:
                if t.suffix:
                    single_tail(t.prefactor, t.suffix[0])
                else:
                    el = el + euler_lagrange(t.prefactor, fields)
            continue

        id1, id2 = term.suffix
        v1 = SuperPoly.factor(table.factor(id1))
        v2 = SuperPoly.factor(table.factor(id2))
        B = term.prefactor
        q2 = _antiderivative(B * v2, fields, table, note="level-2 antiderivative")
        q1 = _antiderivative(B * v1, fields, table, note="level-2 antiderivative")
        formal_used = formal_used or q1.formal or q2.formal
        el = el + _el_sum(B, v1 * v2, fields, table)
        el = el + _el_sum(table.density(id1), q2.value, fields, table)
        el = el + _el_sum(table.density(id2), q1.value, fields, table).scale(-1)

    canon = ELResult(
        tuple(x.canonical() for x in el.du),
        tuple(x.canonical() for x in el.dp),
    )
    return ELComputation(canon, formal_used)


def reduce_depth(term: TailTerm, table: NonlocalVarTable, fields: Fields) -> tuple[list[TailTerm], bool]:
    """Rewrite a two-tail term into one-tail terms modulo a total derivative.

    With y an explicit antiderivative of the prefactor B,

        B*v*w  ==  d_x(y*v*w) - y*Z_v*w - y*v*Z_w

    so the term is equivalent to the two right-hand products, each of
    strictly smaller nonlocal depth.  When B does not integrate, a formal
    level-2 variable is registered for B*v and the term is returned
    unchanged with the flag set.
    """
    if len(term.suffix) != 2:
        raise UnsupportedStructureError("reduce_depth expects a two-tail term")
    id1, id2 = term.suffix
    v1 = SuperPoly.factor(table.factor(id1))
    v2 = SuperPoly.factor(table.factor(id2))
    content, reduced = scalar_content(term.prefactor)
    if reduced.is_structurally_zero():
        return [], False
    result = integrate_density(reduced, fields, table)
    if not result.ok:
        table.register((reduced * v1).canonical(), formal=True, note="level-2 antiderivative")
        return [term], True
    y = result.antiderivative.scale(content)
    rewritten = (-y) * table.density(id1) * v2 + (-y) * v1 * table.density(id2)
    local, tails = split_tails(rewritten.canonical(), table)
    out = list(tails)
    if not local.is_zero():
        out.append(TailTerm(local, ()))
    return out, False
