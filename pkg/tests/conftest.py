import pathlib
import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import strategies as st

from diracq.exactalg import H, Poly, parse, var_name
from diracq.geom import MixedMultivector

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

XS = [1, 2, 3]
BS = [1001, 1002]


def to_sympy(p):
    """Independent oracle: hand the canonical text to sympy."""
    return sp.sympify(str(p).replace("^", "**"))


def sigma(m, k, terms):
    """Mixed element from {"I|J": text}, e.g. {"12|": "h", "2|1": "-h*x1"}."""
    out = {}
    for key, text in terms.items():
        I, _, J = key.partition("|")
        out[(tuple(int(c) for c in I), tuple(int(c) for c in J))] = parse(text)
    return MixedMultivector(m, k, out)


def sym(v):
    return sp.Symbol(var_name(v))


@st.composite
def polys(draw, variables=tuple(XS + BS), max_terms=4, max_deg=2, hbar=False):
    out = Poly()
    for _ in range(draw(st.integers(0, max_terms))):
        num = draw(st.integers(-4, 4))
        den = draw(st.sampled_from([1, 2, 3]))
        mono = Poly.const(Fraction(num, den))
        for v in draw(st.lists(st.sampled_from(list(variables)), max_size=max_deg)):
            mono = mono * Poly.var(v)
        if hbar:
            mono = mono * Poly.var(H, draw(st.integers(0, 2)))
        out = out + mono
    return out


@pytest.fixture
def rnd():
    return random.Random(20240611)


# acceptance criteria report, filled in by test_acceptance.py
CRITERIA: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, text = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")
