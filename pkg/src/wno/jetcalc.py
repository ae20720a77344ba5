"""Derivations on graded differential polynomials.

Total x-derivative (nonlocal-aware through a variable table), variational
derivatives of local values, linearization of a density, and the formal
adjoint.  Variational derivatives of values containing nonlocal factors
live in :mod:`wno.nonlocal_vars`; the functions here refuse such input
instead of silently computing the wrong thing.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import sympy as sp

from .algebra import Expr, Fields, OddFactor, SuperPoly, Word, normalize_word, p


class NonlocalInputError(ValueError):
    """Raised when a local-only derivation receives nonlocal factors."""


class UnregisteredNonlocalError(KeyError):
    """Raised when a nonlocal factor has no table entry."""


def total_x(a: SuperPoly, fields: Fields, table=None) -> SuperPoly:
    """Total x-derivative.

    Acts as an even derivation: raises jet orders in the coefficients and
    in the odd factors, and unfolds each nonlocal factor into its defining
    density in place (same position, so no extra sign).
    """
    acc: dict[Word, Expr] = {}

    def put(word, coeff):
        if coeff == 0 or word is None:
            return
        if word in acc:
            acc[word] = acc[word] + coeff
        else:
            acc[word] = coeff

    for word, coeff in a.terms.items():
        dcoeff = sp.Integer(0)
        for sym, idx, order in fields.jet_symbols(coeff):
            d = sp.diff(coeff, sym)
            if d != 0:
                dcoeff = dcoeff + d * fields.jet(idx, order + 1)
        put(word, dcoeff)

        for pos, f in enumerate(word):
            if f.kind == "p":
                repl = word[:pos] + (p(f.index, f.order + 1),) + word[pos + 1 :]
                sign, nw = normalize_word(repl)
                put(nw, sign * coeff)
            else:
                if table is None:
                    raise UnregisteredNonlocalError(
                        f"nonlocal factor {f.index} needs a variable table"
                    )
                density = table.density(f.index)
                for dw, dc in density.terms.items():
                    repl = word[:pos] + dw + word[pos + 1 :]
                    sign, nw = normalize_word(repl)
                    put(nw, sign * coeff * dc)
    return SuperPoly(acc)


def total_x_pow(a: SuperPoly, order: int, fields: Fields, table=None) -> SuperPoly:
    out = a
    for _ in range(order):
        out = total_x(out, fields, table)
    return out


def _require_local(a: SuperPoly, what: str) -> None:
    bad = a.nonlocal_ids()
    if bad:
        raise NonlocalInputError(
            f"{what} is defined for local values only; "
            f"nonlocal factors {sorted(bad)} present (use the nonlocal EL rules)"
        )


def var_deriv(a: SuperPoly, index: int, kind: str, fields: Fields) -> SuperPoly:
    """Variational derivative of a local value with respect to one field.

    ``kind`` selects the even slot (jet variables of the field) or the odd
    slot (its dual factors): sum over orders of (-1)^k d_x^k applied to the
    corresponding partial derivative.
    """
    _require_local(a, "var_deriv")
    out = SuperPoly.zero()
    if kind == "even":
        orders = {
            o
            for coeff in a.terms.values()
            for _, i, o in fields.jet_symbols(coeff)
            if i == index
        }
        for order in orders:
            part = a.partial_even(fields.jet(index, order))
            term = total_x_pow(part, order, fields)
            out = out + (term if order % 2 == 0 else -term)
    elif kind == "odd":
        factors = {f for f in a.jet_factors() if f.index == index}
        for f in factors:
            part = a.partial_odd(f)
            term = total_x_pow(part, f.order, fields)
            out = out + (term if f.order % 2 == 0 else -term)
    else:
        raise ValueError("kind must be 'even' or 'odd'")
    return out


@dataclass
class ELResult:
    """Variational-derivative tuple, one entry per field and slot."""

    du: tuple[SuperPoly, ...]
    dp: tuple[SuperPoly, ...]

    def __add__(self, other: "ELResult") -> "ELResult":
        return ELResult(
            tuple(a + b for a, b in zip(self.du, other.du)),
            tuple(a + b for a, b in zip(self.dp, other.dp)),
        )

    def scale(self, value) -> "ELResult":
        return ELResult(
            tuple(a.scale(value) for a in self.du),
            tuple(a.scale(value) for a in self.dp),
        )

    def is_zero(self) -> bool:
        return all(a.is_zero() for a in self.du) and all(a.is_zero() for a in self.dp)

    def equals(self, other: "ELResult") -> bool:
        return all(a.equals(b) for a, b in zip(self.du, other.du)) and all(
            a.equals(b) for a, b in zip(self.dp, other.dp)
        )

    @staticmethod
    def zero(n: int) -> "ELResult":
        return ELResult(
            tuple(SuperPoly.zero() for _ in range(n)),
            tuple(SuperPoly.zero() for _ in range(n)),
        )


def euler_lagrange(a: SuperPoly, fields: Fields) -> ELResult:
    """Full variational-derivative tuple of a local value."""
    _require_local(a, "euler_lagrange")
    return ELResult(
        tuple(var_deriv(a, i, "even", fields) for i in range(1, fields.n + 1)),
        tuple(var_deriv(a, i, "odd", fields) for i in range(1, fields.n + 1)),
    )


@dataclass
class LinearizationOp:
    """Finite-order operator rows of a linearized density.

    ``rows[(slot, i)]`` is a list of ``(coefficient, order)`` pairs meaning
    sum of coefficient * d_x^order acting on the slot-i component of the
    argument.  Slots: ``"u"`` (even) and ``"p"`` (odd).
    """

    fields: Fields
    rows: dict[tuple[str, int], list[tuple[SuperPoly, int]]]

    def merged(self) -> "LinearizationOp":
        out: dict[tuple[str, int], list[tuple[SuperPoly, int]]] = {}
        for key, entries in self.rows.items():
            by_order: dict[int, SuperPoly] = {}
            for coeff, order in entries:
                by_order[order] = by_order.get(order, SuperPoly.zero()) + coeff
            kept = [
                (c.canonical(), k)
                for k, c in sorted(by_order.items())
                if not c.is_zero()
            ]
            if kept:
                out[key] = kept
        return LinearizationOp(self.fields, out)

    def equals(self, other: "LinearizationOp") -> bool:
        a, b = self.merged(), other.merged()
        keys = set(a.rows) | set(b.rows)
        for key in keys:
            da = {k: c for c, k in a.rows.get(key, [])}
            db = {k: c for c, k in b.rows.get(key, [])}
            for order in set(da) | set(db):
                ca = da.get(order, SuperPoly.zero())
                cb = db.get(order, SuperPoly.zero())
                if not ca.equals(cb):
                    return False
        return True

    def apply_to_one(self) -> ELResult:
        """Evaluate the operator on the constant argument 1 in every slot."""
        n = self.fields.n
        du = [SuperPoly.zero() for _ in range(n)]
        dp = [SuperPoly.zero() for _ in range(n)]
        for (slot, i), entries in self.rows.items():
            for coeff, order in entries:
                if order == 0:
                    if slot == "u":
                        du[i - 1] = du[i - 1] + coeff
                    else:
                        dp[i - 1] = dp[i - 1] + coeff
        return ELResult(tuple(du), tuple(dp))


def linearize(a: SuperPoly, fields: Fields) -> LinearizationOp:
    """Linearization of a local density.

    Even rows carry the raw partials with respect to the jet variables;
    odd rows carry the graded partials with the parity sign of the density
    folded in, split per homogeneous part when the input is mixed.
    """
    _require_local(a, "linearize")
    rows: dict[tuple[str, int], list[tuple[SuperPoly, int]]] = {}

    def add_row(slot, i, coeff, order):
        if coeff.is_structurally_zero():
            return
        rows.setdefault((slot, i), []).append((coeff, order))

    for i in range(1, fields.n + 1):
        orders = {
            o
            for coeff in a.terms.values()
            for _, j, o in fields.jet_symbols(coeff)
            if j == i
        }
        for order in orders:
            add_row("u", i, a.partial_even(fields.jet(i, order)), order)

    for parity in (0, 1):
        part = a.parity_part(parity)
        if part.is_structurally_zero():
            continue
        sign = 1 if parity == 1 else -1  # (-1)^(parity+1)
        for f in sorted(part.jet_factors(), key=OddFactor.sort_key):
            add_row("p", f.index, part.partial_odd(f).scale(sign), f.order)
    return LinearizationOp(fields, rows).merged()


def adjoint(op: LinearizationOp) -> LinearizationOp:
    """Formal adjoint, row by row.

    A row c * d^k becomes (-1)^k sum_m C(k, m) d^(k-m)(c) * d^m.  Rows
    acting on the odd slot pick up an extra factor (-1)^(parity of c):
    the duality pairing is graded, and this is the convention under which
    evaluating the adjoint of a linearization at the constant 1 returns the
    variational-derivative tuple of its density (see README).
    """
    rows: dict[tuple[str, int], list[tuple[SuperPoly, int]]] = {}
    for key, entries in op.rows.items():
        slot_parity = 1 if key[0] == "p" else 0
        for coeff, order in entries:
            for parity in (0, 1):
                part = coeff.parity_part(parity)
                if part.is_structurally_zero():
                    continue
                sign = (-1) ** order * (-1) ** (parity * slot_parity)
                for m in range(order + 1):
                    lowered = total_x_pow(part, order - m, op.fields)
                    rows.setdefault(key, []).append(
                        (lowered.scale(sign * comb(order, m)), m)
                    )
    return LinearizationOp(op.fields, rows).merged()
