#!/usr/bin/env python3
"""Run the three bundled case studies and print their full reports.

Usage: python scripts/worked_examples.py
"""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from wno.algebra import render_superpoly
from wno.dsl import parse
from wno.geometry import build_operator, check_conditions
from wno.nonlocal_vars import NonlocalVarTable
from wno.schouten import is_hamiltonian


def show_operator(doc, name):
    op = doc.operators[name]
    table = NonlocalVarTable()
    res = is_hamiltonian(op, table)
    names = table.names()
    print(f"== operator {name}")
    print(f"   skew-adjoint: {res.skew.ok}")
    print(
        "   self-bracket representative:",
        render_superpoly(res.bracket.three_vector, op.fields, names),
    )
    for i, part in enumerate(res.bracket.el.du, start=1):
        print(f"   EL du[{i}] =", render_superpoly(part, op.fields, names))
    for i, part in enumerate(res.bracket.el.dp, start=1):
        print(f"   EL dp[{i}] =", render_superpoly(part, op.fields, names))
    print(f"   verdict: {'Hamiltonian' if res.ok else 'not Hamiltonian'}")
    print()


def show_firstorder(doc, name):
    metric = doc.firstorder[name]
    print(f"== firstorder {name}")
    for check in check_conditions(metric):
        mark = "pass" if check.ok else f"FAIL ({check.witness})"
        print(f"   {check.name}: {mark}")
    res = is_hamiltonian(build_operator(metric))
    print(f"   bracket cross-check: {'Hamiltonian' if res.ok else 'not Hamiltonian'}")
    print()


def main():
    kn = parse((REPO / "cases" / "kn.wno").read_text())
    show_operator(kn, "KN")

    mkdv = parse((REPO / "cases" / "mkdv.wno").read_text())
    for name in ("mkdv2", "mkdv2loc", "kdv"):
        show_operator(mkdv, name)

    first = parse((REPO / "cases" / "firstorder.wno").read_text())
    for name in ("sphere", "flatbad"):
        show_firstorder(first, name)


if __name__ == "__main__":
    main()
