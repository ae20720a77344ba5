"""Text format for declaring fields, operators and first-order metric data.

Grammar (EBNF):

    file       := decl*
    decl       := fields | operator | firstorder
    fields     := "fields" ident ("," ident)* ";"
    operator   := "operator" ident "{" entry* "}"
    entry      := "local[" int "," int "]:" diffexpr ";"
                | "nonlocal[" int "," int "]:" rational "*" "[" expr "|" expr "]" ";"
    firstorder := "firstorder" ident "{" ("g[" int "," int "]:" expr ";")+
                                         ("w[" int "," int "]:" expr ";")* "}"
    diffexpr   := diffterm (("+" | "-") diffterm)*
    diffterm   := [expr "*"] "D" ["^" int] | expr          -- D^0 implicit
    expr       := sum | product | power | "(" expr ")" | rational | jetname
    jetname    := field | field "_x" | field "_<k>x"

Numbers are integers; rationals are written as quotients (``2/3``).  Floats
are rejected.  Each ``nonlocal[i,j]`` entry declares one rank-one tail
``e * w d^(-1) z`` whose vectors are supported in slots i and j.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .algebra import Expr, Fields
from .geometry import MetricData
from .schouten import Tail, WNOperator


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str  # ident | int | punct | end
    text: str
    line: int
    col: int


_PUNCT = ("{", "}", "[", "]", ":", ";", ",", "|", "*", "+", "-", "/", "^", "(", ")")
_TOKEN_RE = re.compile(
    r"[ \t\r\n]+|#[^\n]*"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<int>\d+)"
    r"|(?P<punct>" + "|".join(re.escape(c) for c in _PUNCT) + ")"
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            col = pos - line_start + 1
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        col = pos - line_start + 1
        if m.lastgroup == "ident":
            tokens.append(Token("ident", text, line, col))
        elif m.lastgroup == "int":
            tokens.append(Token("int", text, line, col))
        elif m.lastgroup == "punct":
            tokens.append(Token("punct", text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("end", "", line, len(source) - line_start + 1))
    return tokens


@dataclass
class OperatorFile:
    fields: Fields
    operators: dict[str, WNOperator] = field(default_factory=dict)
    firstorder: dict[str, MetricData] = field(default_factory=dict)

    def lookup(self, name: str):
        if name in self.operators:
            return self.operators[name]
        if name in self.firstorder:
            return self.firstorder[name]
        raise KeyError(name)


class Parser:
    """Recursive-descent parser for the operator file format."""

    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0
        self.fields: Fields | None = None

    # -- token plumbing ---------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            got = tok.text or "end of input"
            self.fail(f"expected {want!r}, got {got!r}")
        return self.next()

    # -- declarations -------------------------------------------------------

    def parse_file(self) -> OperatorFile:
        out = None
        while self.peek().kind != "end":
            tok = self.peek()
            if tok.kind != "ident":
                self.fail("expected a declaration")
            if tok.text == "fields":
                self.parse_fields()
                if out is None:
                    out = OperatorFile(self.fields)
                else:
                    self.fail("fields may be declared only once", tok)
            elif tok.text == "operator":
                if out is None:
                    self.fail("declare fields before operators", tok)
                name, op = self.parse_operator()
                self._check_fresh(out, name, tok)
                out.operators[name] = op
            elif tok.text == "firstorder":
                if out is None:
                    self.fail("declare fields before firstorder blocks", tok)
                name, metric = self.parse_firstorder()
                self._check_fresh(out, name, tok)
                out.firstorder[name] = metric
            else:
                self.fail(f"unknown declaration {tok.text!r}")
        if out is None:
            self.fail("empty file: no fields declaration")
        return out

    def _check_fresh(self, out: OperatorFile, name: str, tok: Token):
        if name in out.operators or name in out.firstorder:
            self.fail(f"duplicate definition of {name!r}", tok)

    def parse_fields(self) -> None:
        self.expect("ident", "fields")
        names = [self.expect("ident").text]
        while self.peek().text == ",":
            self.next()
            names.append(self.expect("ident").text)
        self.expect("punct", ";")
        try:
            self.fields = Fields(tuple(names))
        except ValueError as exc:
            self.fail(str(exc))

    def parse_index_pair(self) -> tuple[int, int]:
        self.expect("punct", "[")
        itok = self.expect("int")
        self.expect("punct", ",")
        jtok = self.expect("int")
        self.expect("punct", "]")
        i, j = int(itok.text), int(jtok.text)
        n = self.fields.n
        for tok, value in ((itok, i), (jtok, j)):
            if not 1 <= value <= n:
                raise ParseError(f"index {value} out of range 1..{n}", tok.line, tok.col)
        return i, j

    def parse_operator(self) -> tuple[str, WNOperator]:
        self.expect("ident", "operator")
        name = self.expect("ident").text
        self.expect("punct", "{")
        n = self.fields.n
        local: list[list[list[tuple[Expr, int]]]] = [
            [[] for _ in range(n)] for _ in range(n)
        ]
        tails: list[Tail] = []
        while self.peek().text != "}":
            kind = self.expect("ident")
            if kind.text == "local":
                i, j = self.parse_index_pair()
                self.expect("punct", ":")
                local[i - 1][j - 1].extend(self.parse_diffexpr())
                self.expect("punct", ";")
            elif kind.text == "nonlocal":
                i, j = self.parse_index_pair()
                self.expect("punct", ":")
                constant = self.parse_rational()
                self.expect("punct", "*")
                self.expect("punct", "[")
                w_expr = self.parse_expr(stop={"|"})
                self.expect("punct", "|")
                z_expr = self.parse_expr(stop={"]"})
                self.expect("punct", "]")
                self.expect("punct", ";")
                wvec = [sp.Integer(0)] * n
                zvec = [sp.Integer(0)] * n
                wvec[i - 1] = w_expr
                zvec[j - 1] = z_expr
                tails.append(Tail(constant, tuple(wvec), tuple(zvec)))
            else:
                self.fail("expected 'local' or 'nonlocal' entry", kind)
        self.expect("punct", "}")
        return name, WNOperator(self.fields, local, tails)

    def parse_firstorder(self) -> tuple[str, MetricData]:
        self.expect("ident", "firstorder")
        name = self.expect("ident").text
        self.expect("punct", "{")
        n = self.fields.n
        g: list[list[Expr]] = [[sp.Integer(0)] * n for _ in range(n)]
        w: list[list[Expr]] = [[sp.Integer(0)] * n for _ in range(n)]
        saw_g = False
        while self.peek().text != "}":
            kind = self.expect("ident")
            if kind.text not in ("g", "w"):
                self.fail("expected 'g' or 'w' entry", kind)
            i, j = self.parse_index_pair()
            self.expect("punct", ":")
            etok = self.peek()
            expr = self.parse_expr(stop={";"})
            self.expect("punct", ";")
            for sym in expr.free_symbols:
                hit = self.fields.classify(sym)
                if hit is None or hit[1] != 0:
                    raise ParseError(
                        f"metric entries must depend on order-0 variables only, got {sym}",
                        etok.line,
                        etok.col,
                    )
            target = g if kind.text == "g" else w
            target[i - 1][j - 1] = expr
            saw_g = saw_g or kind.text == "g"
        self.expect("punct", "}")
        if not saw_g:
            self.fail("firstorder block needs at least one g entry")
        try:
            metric = MetricData(self.fields, g, w)
        except ValueError as exc:
            self.fail(str(exc))
        return name, metric

    # -- expressions ---------------------------------------------------------

    def parse_diffexpr(self) -> list[tuple[Expr, int]]:
        """Sum of coefficient * D^k terms; D^0 is implicit."""
        entries = [self.parse_diffterm(sign=1)]
        while self.peek().text in ("+", "-"):
            sign = 1 if self.next().text == "+" else -1
            entries.append(self.parse_diffterm(sign=sign))
        return entries

    def parse_diffterm(self, sign: int) -> tuple[Expr, int]:
        coeff = sp.Integer(sign)
        while True:
            tok = self.peek()
            if tok.kind == "ident" and tok.text == "D":
                self.next()
                if self.peek().text == "^":
                    self.next()
                    order = int(self.expect("int").text)
                else:
                    order = 1
                if self.peek().text == "*":
                    self.fail("D must be the rightmost factor of a term")
                return coeff, order
            factor = self.parse_power()
            while self.peek().text == "/":
                self.next()
                factor = factor / self.parse_power()
            coeff = coeff * factor
            if self.peek().text == "*":
                self.next()
                continue
            return coeff, 0

    def parse_rational(self) -> sp.Rational:
        tok = self.peek()
        if tok.text == "-":
            self.next()
            return -self.parse_rational()
        if tok.text == "+":
            self.next()
            return self.parse_rational()
        if tok.text == "(":
            self.next()
            inner = self.parse_rational()
            self.expect("punct", ")")
            return inner
        if tok.kind == "int":
            self.next()
            value = sp.Integer(int(tok.text))
            if self.peek().text == "/":
                self.next()
                qtok = self.expect("int")
                if int(qtok.text) == 0:
                    raise ParseError("division by zero", qtok.line, qtok.col)
                value = sp.Rational(int(tok.text), int(qtok.text))
            return value
        self.fail("expected a rational constant")

    def parse_expr(self, stop: set[str]) -> Expr:
        expr = self.parse_sum()
        tok = self.peek()
        if tok.text not in stop and tok.kind != "end":
            self.fail(f"unexpected {tok.text!r} in expression")
        return expr

    def parse_sum(self) -> Expr:
        left = self.parse_product()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            right = self.parse_product()
            left = left + right if op == "+" else left - right
        return left

    def parse_product(self) -> Expr:
        left = self.parse_power()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            right = self.parse_power()
            if op == "*":
                left = left * right
            else:
                left = left / right
        return left

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().text == "^":
            self.next()
            neg = False
            if self.peek().text == "-":
                self.next()
                neg = True
            exp = int(self.expect("int").text)
            return base ** (-exp if neg else exp)
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.text == "-":
            self.next()
            return -self.parse_power()
        if tok.text == "+":
            self.next()
            return self.parse_power()
        if tok.text == "(":
            self.next()
            inner = self.parse_sum()
            self.expect("punct", ")")
            return inner
        if tok.kind == "int":
            self.next()
            return sp.Integer(int(tok.text))
        if tok.kind == "ident":
            self.next()
            return self.jet_from_name(tok)
        self.fail("expected a number, variable, or parenthesized expression")

    def jet_from_name(self, tok: Token) -> sp.Symbol:
        name = tok.text
        if name == "D":
            self.fail("D is only valid inside a local[] entry", tok)
        base, _, suffix = name.partition("_")
        if base not in self.fields.names:
            raise ParseError(f"undeclared field {base!r}", tok.line, tok.col)
        if "_" not in name:
            return self.fields.jet(self.fields.names.index(base) + 1, 0)
        m = re.fullmatch(r"(\d*)x", suffix)
        if not m:
            raise ParseError(
                f"bad derivative suffix in {name!r} (use _x, _2x, ...)",
                tok.line,
                tok.col,
            )
        order = int(m.group(1)) if m.group(1) else 1
        return self.fields.jet(self.fields.names.index(base) + 1, order)


def parse(source: str) -> OperatorFile:
    return Parser(source).parse_file()


# -- rendering -----------------------------------------------------------


def _render_expr(expr: Expr) -> str:
    """Expression in file syntax: ^ for powers, no floats."""
    expr = sp.cancel(expr)

    def walk(e: Expr, parent: str) -> str:
        if e.is_Symbol:
            return e.name
        if e.is_Integer:
            s = str(e)
            return f"({s})" if e < 0 and parent in ("mul", "pow") else s
        if e.is_Rational:
            s = f"{e.p}/{e.q}"
            return f"({s})" if parent in ("mul", "pow") else s
        if e.is_Add:
            s = " + ".join(walk(a, "add") for a in e.as_ordered_terms())
            s = s.replace("+ -", "- ")
            return f"({s})" if parent in ("mul", "pow") else s
        if e.is_Mul:
            num, den = e.as_numer_denom()
            if den != 1:
                return walk(num, "mul") + "/" + walk(den, "pow")
            s = "*".join(walk(a, "mul") for a in e.as_ordered_factors())
            return f"({s})" if parent == "pow" else s
        if e.is_Pow:
            base, exp = e.args
            if exp.is_Integer and exp > 0:
                return f"{walk(base, 'pow')}^{exp}"
            if exp.is_Integer and exp < 0:
                return f"1/{walk(base, 'pow')}^{-exp}"
        raise ValueError(f"cannot render {e} in file syntax")

    return walk(expr, "add")


def render(doc: OperatorFile) -> str:
    """Canonical text form; parsing it back yields an identical structure."""
    lines = [f"fields {', '.join(doc.fields.names)};"]
    for name, op in doc.operators.items():
        lines.append(f"operator {name} {{")
        for i in range(1, op.n + 1):
            for j in range(1, op.n + 1):
                row = op.merged_entry(i, j)
                if not row:
                    continue
                bits = []
                for coeff, order in row:
                    cs = _render_expr(coeff)
                    if order == 0:
                        bits.append(cs)
                    else:
                        d = "D" if order == 1 else f"D^{order}"
                        bits.append(d if cs == "1" else f"{cs}*{d}")
                lines.append(f"  local[{i},{j}]: {' + '.join(bits)};")
        for tail in op.tails:
            slots_w = [k for k, v in enumerate(tail.left) if v != 0]
            slots_z = [k for k, v in enumerate(tail.right) if v != 0]
            if len(slots_w) != 1 or len(slots_z) != 1:
                raise ValueError(
                    "only rank-one single-slot tails can be rendered in file syntax"
                )
            i, j = slots_w[0] + 1, slots_z[0] + 1
            const = _render_expr(tail.constant)
            if "/" in const or const.startswith("-"):
                const = f"({const})"
            lines.append(
                f"  nonlocal[{i},{j}]: {const}*"
                f"[{_render_expr(tail.left[i - 1])}|{_render_expr(tail.right[j - 1])}];"
            )
        lines.append("}")
    for name, metric in doc.firstorder.items():
        lines.append(f"firstorder {name} {{")
        n = metric.n
        for i in range(n):
            for j in range(n):
                if metric._g[i, j] != 0:
                    lines.append(f"  g[{i + 1},{j + 1}]: {_render_expr(metric._g[i, j])};")
        for i in range(n):
            for j in range(n):
                if metric._W[i, j] != 0:
                    lines.append(f"  w[{i + 1},{j + 1}]: {_render_expr(metric._W[i, j])};")
        lines.append("}")
    return "\n".join(lines) + "\n"
