"""Shared fixtures and random-input builders for the test suite."""

from __future__ import annotations

import random

import pytest
import sympy as sp

from wno.algebra import Fields, SuperPoly, p


@pytest.fixture(scope="session")
def F1() -> Fields:
    return Fields(("u",))


@pytest.fixture(scope="session")
def F2() -> Fields:
    return Fields(("u1", "u2"))


def random_rational(rng: random.Random) -> sp.Rational:
    num = rng.randint(-4, 4)
    if num == 0:
        num = 1
    return sp.Rational(num, rng.randint(1, 3))


def random_coeff(rng: random.Random, fields: Fields, max_order: int = 2) -> sp.Expr:
    expr = random_rational(rng)
    for _ in range(rng.randint(0, 2)):
        expr = expr * fields.jet(rng.randint(1, fields.n), rng.randint(0, max_order))
    return expr


def random_local(
    rng: random.Random,
    fields: Fields,
    degree: int,
    max_order: int = 3,
    terms: int = 2,
) -> SuperPoly:
    """Random local value of the given odd degree (may normalize to zero)."""
    raw = []
    for _ in range(terms):
        factors = [
            p(rng.randint(1, fields.n), rng.randint(0, max_order))
            for _ in range(degree)
        ]
        raw.append((random_coeff(rng, fields, max_order), factors))
    return SuperPoly.from_terms(raw)


def random_local_mixed(
    rng: random.Random, fields: Fields, max_degree: int = 3, max_order: int = 4
) -> SuperPoly:
    out = SuperPoly.zero()
    for _ in range(rng.randint(1, 3)):
        degree = rng.randint(0, max_degree)
        out = out + random_local(rng, fields, degree, max_order, terms=1)
    return out
