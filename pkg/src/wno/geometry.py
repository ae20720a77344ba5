"""First-order homogeneous weakly nonlocal operators from metric data.

Input is a contravariant metric g (entries rational functions of the
order-0 variables only) together with an affinor W.  The derived geometry
fixes the Levi-Civita connection of the inverse metric, the contravariant
Christoffel symbols, the curvature with both upper indices, and the
covariant derivative of W, and the module checks the classical system of
conditions equivalent to the Poisson property of

    P = g d + Gamma u_x + (W u_x) d^(-1) (W u_x)

independently of the bracket computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .algebra import Expr, Fields, coeff_is_zero
from .schouten import Tail, WNOperator


class SingularMetricError(ValueError):
    """The metric determinant vanishes identically."""


Matrix = list[list[Expr]]


def _as_matrix(rows: Matrix, n: int, what: str) -> sp.Matrix:
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"{what} must be an {n}x{n} matrix")
    return sp.Matrix(rows)


@dataclass
class MetricData:
    """Concrete input: contravariant metric and affinor, functions of u only."""

    fields: Fields
    g_upper: Matrix
    W: Matrix

    def __post_init__(self):
        n = self.fields.n
        self._g = _as_matrix(self.g_upper, n, "g")
        self._W = _as_matrix(self.W, n, "W")
        for name, m in (("g", self._g), ("W", self._W)):
            for entry in m:
                for sym in entry.free_symbols:
                    hit = self.fields.classify(sym)
                    if hit is None or hit[1] != 0:
                        raise ValueError(
                            f"{name} entries must depend on order-0 variables only; "
                            f"found {sym}"
                        )

    @property
    def n(self) -> int:
        return self.fields.n

    def coords(self) -> list[sp.Symbol]:
        return [self.fields.jet(i, 0) for i in range(1, self.n + 1)]


@dataclass
class DerivedGeometry:
    g_lower: sp.Matrix
    gamma_lc: list  # gamma_lc[i][j][k] = Gamma^i_jk of the lower metric
    gamma_upper: list  # gamma_upper[i][j][k] = Gamma^{ij}_k = -g^{is} Gamma^j_sk
    curvature: list  # curvature[i][j][k][h] = R^{ij}_kh = g^{js} R^i_skh
    nabla_w: list  # nabla_w[i][j][k] = covariant derivative of W^j_k along u^i


def derive_geometry(m: MetricData) -> DerivedGeometry:
    """Exact inverse metric, Levi-Civita symbols, curvature and nabla W."""
    n = m.n
    g_up = m._g
    det = sp.cancel(g_up.det())
    if det == 0:
        raise SingularMetricError("metric is singular: det(g) == 0")
    g_lo = g_up.inv().applyfunc(sp.cancel)
    x = m.coords()

    def d(expr, k):
        return sp.diff(expr, x[k])

    gamma = [
        [
            [
                sp.cancel(
                    sp.Rational(1, 2)
                    * sum(
                        g_up[i, s]
                        * (d(g_lo[s, j], k) + d(g_lo[s, k], j) - d(g_lo[j, k], s))
                        for s in range(n)
                    )
                )
                for k in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    gamma_up = [
        [
            [
                sp.cancel(-sum(g_up[i, s] * gamma[j][s][k] for s in range(n)))
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
    curvature = [
        [
            [
                [
                    sp.cancel(sum(g_up[j, s] * riemann[i][s][k][h] for s in range(n)))
                    for h in range(n)
                ]
                for k in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    W = m._W
    nabla = [
        [
            [
                sp.cancel(
                    d(W[j, k], i)
                    + sum(gamma[j][i][s] * W[s, k] for s in range(n))
                    - sum(gamma[s][i][k] * W[j, s] for s in range(n))
                )
                for k in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    return DerivedGeometry(g_lo, gamma, gamma_up, curvature, nabla)


@dataclass
class ConditionCheck:
    name: str
    ok: bool
    witness: str | None = None


CONDITION_NAMES = (
    "metric_symmetry",
    "metric_compatibility",
    "gGamma_symmetry",
    "gW_symmetry",
    "nablaW_symmetry",
    "gauss_relation",
)


def check_conditions(m: MetricData) -> list[ConditionCheck]:
    """The six-condition system; each verdict carries a witness on failure."""
    n = m.n
    geo = derive_geometry(m)
    g = m._g
    W = m._W
    x = m.coords()
    out = []

    def verdict(name, pairs):
        for label, expr in pairs:
            if not coeff_is_zero(expr):
                out.append(ConditionCheck(name, False, f"{label}: {sp.cancel(expr)}"))
                return
        out.append(ConditionCheck(name, True))

    verdict(
        "metric_symmetry",
        [
            (f"g[{i + 1},{j + 1}] - g[{j + 1},{i + 1}]", g[i, j] - g[j, i])
            for i in range(n)
            for j in range(i + 1, n)
        ],
    )
    verdict(
        "metric_compatibility",
        [
            (
                f"dg[{i + 1},{j + 1}]/du{k + 1}",
                sp.diff(g[i, j], x[k])
                - geo.gamma_upper[i][j][k]
                - geo.gamma_upper[j][i][k],
            )
            for i in range(n)
            for j in range(n)
            for k in range(n)
        ],
    )
    verdict(
        "gGamma_symmetry",
        [
            (
                f"(i,j,k)=({i + 1},{j + 1},{k + 1})",
                sum(g[i, s] * geo.gamma_upper[j][k][s] for s in range(n))
                - sum(g[j, s] * geo.gamma_upper[i][k][s] for s in range(n)),
            )
            for i in range(n)
            for j in range(i + 1, n)
            for k in range(n)
        ],
    )
    verdict(
        "gW_symmetry",
        [
            (
                f"(i,j)=({i + 1},{j + 1})",
                sum(g[i, s] * W[j, s] for s in range(n))
                - sum(g[j, s] * W[i, s] for s in range(n)),
            )
            for i in range(n)
            for j in range(i + 1, n)
        ],
    )
    verdict(
        "nablaW_symmetry",
        [
            (
                f"(i,j,k)=({i + 1},{j + 1},{k + 1})",
                geo.nabla_w[i][j][k] - geo.nabla_w[k][j][i],
            )
            for i in range(n)
            for j in range(n)
            for k in range(i + 1, n)
        ],
    )
    verdict(
        "gauss_relation",
        [
            (
                f"(i,j,k,h)=({i + 1},{j + 1},{k + 1},{h + 1})",
                geo.curvature[i][j][k][h]
                - (W[i, k] * W[j, h] - W[j, k] * W[i, h]),
            )
            for i in range(n)
            for j in range(n)
            for k in range(n)
            for h in range(n)
        ],
    )
    return out


def build_operator(m: MetricData) -> WNOperator:
    """Assemble g d + Gamma u_x + (W u_x) d^(-1) (W u_x) from metric data."""
    n = m.n
    geo = derive_geometry(m)
    fields = m.fields
    local: list[list[list[tuple[Expr, int]]]] = [[[] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if m._g[i, j] != 0:
                local[i][j].append((m._g[i, j], 1))
            zeroth = sp.cancel(
                sum(geo.gamma_upper[i][j][k] * fields.jet(k + 1, 1) for k in range(n))
            )
            if zeroth != 0:
                local[i][j].append((zeroth, 0))
    wvec = tuple(
        sp.cancel(sum(m._W[i, k] * fields.jet(k + 1, 1) for k in range(n)))
        for i in range(n)
    )
    tails = []
    if any(w != 0 for w in wvec):
        tails.append(Tail(sp.Integer(1), wvec, wvec))
    return WNOperator(fields, local, tails)
