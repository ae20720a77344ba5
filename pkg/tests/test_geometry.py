"""Metric-data geometry, the condition system, and the bracket cross-check."""

import itertools

import pytest
import sympy as sp

from wno.algebra import Fields
from wno.geometry import (
    MetricData,
    SingularMetricError,
    build_operator,
    check_conditions,
    derive_geometry,
)
from wno.schouten import is_hamiltonian, skew_check

F1 = Fields(("u",))
F2 = Fields(("u1", "u2"))
F3 = Fields(("u1", "u2", "u3"))

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


def identity(n):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def zeros(n):
    return [[ZERO] * n for _ in range(n)]


def sphere_metric():
    u1, u2 = F2.jet(1, 0), F2.jet(2, 0)
    h = 1 + (u1**2 + u2**2) / 4
    return MetricData(F2, [[h**2, ZERO], [ZERO, h**2]], identity(2))


# -- independent oracle ----------------------------------------------------
# Straight-line textbook formulas, written against sympy only, used to pin
# the curvature conventions before trusting the library implementation.


def oracle_curvature(g_lower: sp.Matrix, coords):
    n = len(coords)
    g_inv = g_lower.inv()

    def d(expr, k):
        return sp.diff(expr, coords[k])

    gamma = [
        [
            [
                sp.cancel(
                    sp.Rational(1, 2)
                    * sum(
                        g_inv[i, s]
                        * (d(g_lower[s, j], k) + d(g_lower[s, k], j) - d(g_lower[j, k], s))
                        for s in range(n)
                    )
                )
                for k in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    riemann = [
        [
            [
                [
                    sp.cancel(
                        d(gamma[i][l][j], k)
                        - d(gamma[i][k][j], l)
                        + sum(
                            gamma[i][k][s] * gamma[s][l][j]
                            - gamma[i][l][s] * gamma[s][k][j]
                            for s in range(n)
                        )
                    )
                    for l in range(n)
                ]
                for k in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    return gamma, riemann


class TestDerive:
    def test_constant_metric_is_flat(self):
        m = MetricData(F2, identity(2), zeros(2))
        geo = derive_geometry(m)
        assert all(
            g == 0
            for layer in geo.gamma_lc
            for row in layer
            for g in row
        )
        assert all(
            r == 0
            for a in geo.curvature
            for b in a
            for c in b
            for r in c
        )

    def test_one_dimensional_symbols_and_flatness(self):
        u = F1.jet(1, 0)
        m = MetricData(F1, [[(1 + u) ** 2]], [[ZERO]])
        geo = derive_geometry(m)
        # lower metric 1/(1+u)^2 has Gamma^1_11 = -g'/(2g) for g = (1+u)^2
        expected = sp.cancel(-sp.diff((1 + u) ** 2, u) / (2 * (1 + u) ** 2))
        assert sp.cancel(geo.gamma_lc[0][0][0] - expected) == 0
        assert geo.curvature[0][0][0][0] == 0

    def test_sphere_against_oracle(self):
        m = sphere_metric()
        coords = m.coords()
        u1, u2 = coords
        h = 1 + (u1**2 + u2**2) / 4
        g_lower = sp.Matrix([[1 / h**2, 0], [0, 1 / h**2]])
        gamma, riemann = oracle_curvature(g_lower, coords)
        geo = derive_geometry(m)
        for i, j, k in itertools.product(range(2), repeat=3):
            assert sp.cancel(geo.gamma_lc[i][j][k] - gamma[i][j][k]) == 0
        g_up = sp.Matrix(m.g_upper)
        for i, j, k, l in itertools.product(range(2), repeat=4):
            raised = sp.cancel(
                sum(g_up[j, s] * riemann[i][s][k][l] for s in range(2))
            )
            assert sp.cancel(geo.curvature[i][j][k][l] - raised) == 0
        # unit-sphere normalization
        assert sp.cancel(geo.curvature[0][1][0][1] - 1) == 0

    def test_compatibility_identities_by_construction(self):
        m = sphere_metric()
        geo = derive_geometry(m)
        g = sp.Matrix(m.g_upper)
        x = m.coords()
        for i, j, k in itertools.product(range(2), repeat=3):
            lhs = sp.diff(g[i, j], x[k])
            rhs = geo.gamma_upper[i][j][k] + geo.gamma_upper[j][i][k]
            assert sp.cancel(lhs - rhs) == 0
        for i, j, k in itertools.product(range(2), repeat=3):
            lhs = sum(g[i, s] * geo.gamma_upper[j][k][s] for s in range(2))
            rhs = sum(g[j, s] * geo.gamma_upper[i][k][s] for s in range(2))
            assert sp.cancel(lhs - rhs) == 0

    def test_first_bianchi_on_rational_metrics(self):
        u1, u2 = F3.jet(1, 0), F3.jet(2, 0)
        g = [
            [1 + u2**2, u1 / 2, ZERO],
            [u1 / 2, sp.Integer(2), ZERO],
            [ZERO, ZERO, 3 + u1**2],
        ]
        m = MetricData(F3, g, zeros(3))
        geo = derive_geometry(m)
        g_lo = geo.g_lower

        def lowered(i, j, k, h):
            return sum(g_lo[j, s] * geo.curvature[i][s][k][h] for s in range(3))

        # cyclic identity; triples with a repeated index vanish by the
        # antisymmetry in the last index pair, so distinct triples suffice
        for i in range(3):
            for j, k, h in itertools.combinations(range(3), 3):
                cyc = lowered(i, j, k, h) + lowered(i, k, h, j) + lowered(i, h, j, k)
                assert sp.cancel(cyc) == 0

    def test_singular_metric_raises(self):
        with pytest.raises(SingularMetricError):
            derive_geometry(MetricData(F2, [[ONE, ONE], [ONE, ONE]], zeros(2)))


class TestConditions:
    def test_one_dimensional_family_always_passes(self):
        u = F1.jet(1, 0)
        for g, w in (([[ONE]], [[u]]), ([[1 / (1 + u) ** 2]], [[u**2]])):
            checks = check_conditions(MetricData(F1, g, w))
            assert all(c.ok for c in checks)

    def test_sphere_passes(self):
        assert all(c.ok for c in check_conditions(sphere_metric()))

    def test_perturbed_affinor_fails_with_witness(self):
        u1 = F2.jet(1, 0)
        m = sphere_metric()
        w = [[ONE, u1], [ZERO, ONE]]
        checks = check_conditions(MetricData(F2, m.g_upper, w))
        failing = {c.name for c in checks if not c.ok}
        assert failing & {"nablaW_symmetry", "gauss_relation", "gW_symmetry"}
        assert all(c.witness for c in checks if not c.ok)


class TestBuildOperator:
    def test_flat_scalar_case_is_shift(self):
        m = MetricData(F1, [[ONE]], [[ZERO]])
        P = build_operator(m)
        assert P.merged_entry(1, 1) == [(ONE, 1)]
        assert not P.tails

    def test_scalar_affinor_tail(self):
        u = F1.jet(1, 0)
        u_x = F1.jet(1, 1)
        m = MetricData(F1, [[ONE]], [[u]])
        P = build_operator(m)
        assert len(P.tails) == 1
        assert sp.cancel(P.tails[0].left[0] - u * u_x) == 0

    def test_sphere_operator_is_skew(self):
        P = build_operator(sphere_metric())
        assert skew_check(P).ok
        assert P.tails and P.merged_entry(1, 2)


class TestEquivalence:
    """Condition verdicts and bracket verdicts agree instance by instance."""

    def passing_instances(self):
        u = F1.jet(1, 0)
        yield "scalar flat", MetricData(F1, [[ONE]], [[u]])
        yield "scalar rational metric", MetricData(F1, [[1 / (1 + u**2) ** 2]], [[u]])
        yield "sphere", sphere_metric()
        yield "diag flat n=3", MetricData(F3, identity(3), zeros(3))

    def failing_instances(self):
        u2 = F2.jet(2, 0)
        yield "gW_symmetry", MetricData(F2, identity(2), [[ZERO, ONE], [ZERO, ZERO]])
        yield "nablaW_symmetry", MetricData(F2, identity(2), [[u2, ZERO], [ZERO, ZERO]])
        yield "gauss_relation", MetricData(F2, identity(2), identity(2))

    def test_passing_side(self):
        for label, m in self.passing_instances():
            checks = check_conditions(m)
            assert all(c.ok for c in checks), label
            assert is_hamiltonian(build_operator(m)).ok, label

    def test_failing_side_with_named_condition(self):
        for expected_failure, m in self.failing_instances():
            checks = check_conditions(m)
            failing = [c.name for c in checks if not c.ok]
            assert failing == [expected_failure]
            assert not is_hamiltonian(build_operator(m)).ok, expected_failure
