"""Operator file format: parsing, diagnostics, and the print round-trip."""

import pytest
import sympy as sp

from wno.dsl import ParseError, parse, render
from wno.schouten import operators_equal, skew_check


KN_SOURCE = "fields u; operator KN { nonlocal[1,1]: 1*[u_x|u_x]; }"

MKDV_SOURCE = """
fields u;
operator mkdv2 {
  local[1,1]: D^3 + (2/3)*u^2*D + (2/3)*u*u_x;
  nonlocal[1,1]: -(2/3)*[u_x|u_x];
}
"""


class TestParse:
    def test_pure_tail_operator(self):
        doc = parse(KN_SOURCE)
        op = doc.operators["KN"]
        assert not op.merged_entry(1, 1)
        [tail] = op.tails
        u_x = doc.fields.jet(1, 1)
        assert tail.constant == 1
        assert tail.left == (u_x,) and tail.right == (u_x,)

    def test_mkdv_entries(self):
        doc = parse(MKDV_SOURCE)
        op = doc.operators["mkdv2"]
        u, u_x = doc.fields.jet(1, 0), doc.fields.jet(1, 1)
        assert op.merged_entry(1, 1) == [
            (sp.Rational(2, 3) * u * u_x, 0),
            (sp.Rational(2, 3) * u**2, 1),
            (sp.Integer(1), 3),
        ]
        [tail] = op.tails
        assert tail.constant == sp.Rational(-2, 3)
        assert skew_check(op).ok

    def test_firstorder_block(self):
        doc = parse(
            "fields u1, u2; firstorder m { g[1,1]: 1; g[2,2]: 1 + u1^2; w[1,1]: u2; }"
        )
        m = doc.firstorder["m"]
        assert m._g[1, 1] == 1 + doc.fields.jet(1, 0) ** 2
        assert m._W[0, 0] == doc.fields.jet(2, 0)

    def test_derivative_spellings(self):
        doc = parse("fields u; operator A { local[1,1]: u_2x*D + u_x; }")
        u_2x = doc.fields.jet(1, 2)
        assert doc.operators["A"].merged_entry(1, 1)[1] == (u_2x, 1)

    def test_comments_and_whitespace(self):
        doc = parse("# heading\nfields u;\noperator A { local[1,1]: D; } # tail comment\n")
        assert "A" in doc.operators


class TestDiagnostics:
    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as err:
            parse("fields u; operator A { local[1,1] D; }")
        assert err.value.line == 1 and err.value.col > 0

    def test_undeclared_field(self):
        with pytest.raises(ParseError, match="undeclared field 'v'"):
            parse("fields u; operator A { local[1,1]: v_x*D; }")

    def test_index_out_of_range(self):
        with pytest.raises(ParseError, match="out of range"):
            parse("fields u; operator A { local[1,2]: D; }")

    def test_float_rejected(self):
        with pytest.raises(ParseError):
            parse("fields u; operator A { local[1,1]: 0.5*D; }")

    def test_nonrational_tail_constant(self):
        with pytest.raises(ParseError, match="rational"):
            parse("fields u; operator A { nonlocal[1,1]: u*[u_x|u_x]; }")

    def test_metric_with_jets_rejected(self):
        with pytest.raises(ParseError, match="order-0"):
            parse("fields u; firstorder m { g[1,1]: u_x; }")

    def test_missing_fields_declaration(self):
        with pytest.raises(ParseError, match="fields"):
            parse("operator A { local[1,1]: D; }")

    def test_duplicate_names(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse("fields u; operator A { } operator A { }")

    def test_d_outside_local(self):
        with pytest.raises(ParseError):
            parse("fields u; firstorder m { g[1,1]: D; }")


class TestRoundTrip:
    CASES = [
        KN_SOURCE,
        MKDV_SOURCE,
        "fields u1, u2; operator A { local[1,2]: u2*D^2 + u1_x; local[2,1]: -1*D; }",
        "fields u1, u2; firstorder m { g[1,1]: 1; g[2,2]: (1 + (u1^2+u2^2)/4)^2; w[1,2]: u1/3; }",
    ]

    @pytest.mark.parametrize("source", CASES)
    def test_parse_render_parse(self, source):
        first = parse(source)
        text = render(first)
        second = parse(text)
        assert first.fields == second.fields
        assert set(first.operators) == set(second.operators)
        assert set(first.firstorder) == set(second.firstorder)
        for name, op in first.operators.items():
            assert operators_equal(op, second.operators[name])
        for name, m in first.firstorder.items():
            m2 = second.firstorder[name]
            assert all(
                sp.cancel(m._g[i, j] - m2._g[i, j]) == 0
                and sp.cancel(m._W[i, j] - m2._W[i, j]) == 0
                for i in range(m.n)
                for j in range(m.n)
            )
        assert render(second) == text
