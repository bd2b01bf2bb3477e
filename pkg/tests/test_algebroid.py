from fractions import Fraction

import pytest
import sympy as sp

from conftest import sigma, to_sympy
from diracq.algebroid import (AlgebroidError, CrossSection, FoliatedChart, SectionHomotopy, hom_build,
                              hom_identify, nesting_coherence, pullback_family, restriction_hom,
                              triangle_coherence)
from diracq.dirac import sigma_to_graph
from diracq.exactalg import S, T, U, parse

PARAM_IDS = {"t": T, "s": S, "u": U}

SHEAR = sigma(2, 1, {"12|": "h", "2|1": "-h*x1"})
TRANSLATION = sigma(2, 1, {"12|": "h", "2|1": "h"})
VARYING = sigma(2, 1, {"12|": "h*(x2 - h*b1*x1^2)", "2|1": "-h*x1^2"})
MIXED = sigma(2, 2, {"12|": "h", "2|1": "-h*x1", "2|2": "h", "|12": "h*b1"})
CURVED = sigma(2, 2, {"12|": "h", "2|1": "-h*x1", "2|2": "h^2*b1", "|12": "1 + b1 + h*x1"})


def sec(*c):
    return CrossSection(tuple(parse(x) for x in c))


def hom(*c):
    return SectionHomotopy(tuple(parse(x) for x in c))


def geometric_pullback_agrees(sig, phi, params, sig2, order):
    """Oracle: pull the graph of sig back along (y, p) -> (y, phi(y, p)) as a
    Dirac structure, {(u, i^*xi) : (i_*u, xi) in L}, and compare with the graph
    of sig2 modulo h^(order+1).  Uses sympy linear solving only."""
    m, k, np_ = sig.m, sig.k, len(params)
    h = sp.Symbol("h")
    ys = [sp.Symbol(f"x{i}") for i in range(1, m + 1)]
    bs = [sp.Symbol(f"b{j}") for j in range(1, k + 1)]
    ps = [sp.Symbol(p) for p in params]
    Phi = [sp.sympify(p.replace("^", "**")) for p in phi]
    n = m + k
    rows = [[to_sympy(c).subs(dict(zip(bs, Phi)), simultaneous=True) for c in e.vector + e.covector]
            for e in sigma_to_graph(sig).sections]
    Dy = [[sp.diff(Phi[j], y) for y in ys] for j in range(k)]
    Dp = [[sp.diff(Phi[j], p) for p in ps] for j in range(k)]
    c = sp.symbols(f"c0:{n}")
    up = sp.symbols(f"q0:{np_}") if np_ else ()
    eta = sp.symbols(f"e0:{m}")
    v = [sum(c[a] * rows[a][i] for a in range(n)) for i in range(n)]
    xi = [sum(c[a] * rows[a][n + i] for a in range(n)) for i in range(n)]
    tangent = [v[m + j] - sum(Dy[j][i] * v[i] for i in range(m)) - sum(Dp[j][q] * up[q] for q in range(np_))
               for j in range(k)]
    pulled = [xi[i] + sum(Dy[j][i] * xi[m + j] for j in range(k)) for i in range(m)]
    sol = sp.solve(tangent + [pulled[i] - eta[i] for i in range(m)], c, dict=True)
    assert len(sol) == 1
    sol = sol[0]
    P = ([v[i].subs(sol) for i in range(m)] + list(up) + [pulled[i].subs(sol) for i in range(m)]
         + [sum(Dp[j][q] * xi[m + j] for j in range(k)).subs(sol) for q in range(np_)])
    rename = {sp.Symbol(f"b{i + 1}"): p for i, p in enumerate(ps)}
    G = [[to_sympy(x).subs(rename, simultaneous=True) for x in e.vector + e.covector]
         for e in sigma_to_graph(sig2).sections]
    coeff = list(eta) + list(up)
    for i, lhs in enumerate(P):
        num, den = sp.fraction(sp.cancel(sp.together(lhs - sum(coeff[a] * G[a][i] for a in range(m + np_)))))
        assert sp.expand(den).subs(h, 0) != 0
        low = sp.Poly(sp.expand(num), h).all_coeffs()[::-1][:order + 1]
        if any(sp.expand(x) != 0 for x in low):
            return False
    return True


CASES = [
    (SHEAR, ["x2"], []),
    (SHEAR, ["t*x2"], ["t"]),
    (VARYING, ["t^2*x2"], ["t"]),
    (MIXED, ["t*x2", "s*x1"], ["t", "s"]),
    (CURVED, ["t", "s*t*(1-t)"], ["t", "s"]),
]


@pytest.mark.parametrize("case", range(len(CASES)))
def test_pullback_matches_geometric_oracle(case):
    sig, phi, params = CASES[case]
    sig2 = pullback_family(FoliatedChart(sig, 2), [parse(p) for p in phi], params=[PARAM_IDS[p] for p in params])
    assert geometric_pullback_agrees(sig, phi, params, sig2, 2)


def test_oracle_detects_a_wrong_pullback():
    wrong = sigma(2, 1, {"12|": "h", "2|1": "-h*x1*x2"})
    assert not geometric_pullback_agrees(SHEAR, ["t*x2"], ["t"], wrong, 2)


def test_pullback_examples():
    shear = FoliatedChart(SHEAR, 2)
    # a point section sees the leaf bivector
    assert pullback_family(shear, [parse("0")], 0) == sigma(2, 0, {"12|": "h"})
    assert pullback_family(shear, [parse("x2")], 0) == sigma(2, 0, {"12|": "h + h^2*x1"})
    # a constant homotopy has no dt component
    assert pullback_family(shear, [parse("x2")], 1) == sigma(2, 1, {"12|": "h + h^2*x1"})
    # a translation chart: the dt component does not see the section
    tr = FoliatedChart(TRANSLATION, 2)
    expected = sigma(2, 1, {"12|": "h", "2|1": "h"})
    assert pullback_family(tr, [parse("t")], 1) == expected
    assert pullback_family(tr, [parse("t + x1")], 1) == expected


def test_chart_validation():
    with pytest.raises(AlgebroidError, match="degree conditions"):
        FoliatedChart(sigma(2, 1, {"12|": "x1"}), 2)
    with pytest.raises(AlgebroidError, match="not Maurer-Cartan"):
        FoliatedChart(sigma(3, 0, {"12|": "h*x3", "13|": "h*x1"}), 2)
    with pytest.raises(AlgebroidError, match="components"):
        pullback_family(FoliatedChart(SHEAR, 2), [parse("0"), parse("0")], 0)


def test_hom_build_translation_shift():
    tr = FoliatedChart(TRANSLATION, 2)
    hd = hom_build(tr, sec("0"), sec("1"), hom("t"))
    assert hd.report.ok
    assert hd(parse("x2")) == parse("x2 + h")
    assert hd(parse("x1")) == parse("x1")
    with pytest.raises(AlgebroidError, match="does not start/end"):
        hom_build(tr, sec("0"), sec("1"), hom("t/2"))


@pytest.mark.parametrize("sig,X,Y,h", [
    (SHEAR, ("0",), ("x2",), ("t*x2",)),
    (VARYING, ("0",), ("x2",), ("t^2*x2",)),
    (MIXED, ("0", "0"), ("x2", "x1"), ("t*x2", "t*x1")),
])
def test_hom_build_is_isomorphism(sig, X, Y, h):
    assert hom_build(FoliatedChart(sig, 2), sec(*X), sec(*Y), hom(*h)).report.ok


def test_hom_identify_independent_of_filling():
    chart = FoliatedChart(CURVED, 2)
    X, Y = sec("0", "0"), sec("1", "0")
    h1, h2 = hom("t", "0"), hom("t", "t*(1 - t)")
    fills = (["t", "s*t*(1 - t)"], ["t", "s^2*t*(1 - t)"], ["t + s*(1 - s)*t*(1 - t)/2", "s*t*(1 - t)"])
    elements = []
    for fill in fills:
        ident = hom_identify(chart, X, Y, h1, h2, [parse(p) for p in fill])
        assert ident.relation1.ok
        elements.append(ident.element)
    assert elements[0].lam == Fraction(1, 4)
    assert elements[0] == elements[1] == elements[2]
    with pytest.raises(AlgebroidError, match="wrong restriction"):
        hom_identify(chart, X, Y, h1, h2, [parse("t"), parse("0")])


def test_lambda_of_curved_filling_by_sympy():
    # the classical 2-form 1 + b1 pulled back along (t, s t (1 - t))
    t, s = sp.symbols("t s")
    b1, b2 = t, s * t * (1 - t)
    jac = sp.diff(b1, t) * sp.diff(b2, s) - sp.diff(b1, s) * sp.diff(b2, t)
    assert sp.integrate((1 + b1) * jac, (t, 0, 1), (s, 0, 1)) == sp.Rational(1, 4)


def test_triangle_and_nesting_coherence():
    mixed = FoliatedChart(MIXED, 2)
    X, Y, Z = sec("0", "0"), sec("x2/4", "x1/4"), sec("1/2 + x1*x2/4", "x1/2")
    assert triangle_coherence(FoliatedChart(SHEAR, 2), sec("0"), sec("x1/2"), sec("x2")).report.ok
    assert triangle_coherence(mixed, X, Y, Z).report.ok
    V = {v: (0, Fraction(1, 2)) for v in (1, 2)} | {v: (0, Fraction(1, 4)) for v in (1001, 1002)}
    U_ = {v: (0, Fraction(3, 4)) for v in (1, 2)} | {v: (0, Fraction(1, 2)) for v in (1001, 1002)}
    W = {v: (0, 1) for v in (1, 2, 1001, 1002)}
    assert nesting_coherence(mixed, V, U_, W, X, Y, Z).report.ok


def test_restriction_containment():
    mixed = FoliatedChart(MIXED, 2)
    V = {1: (0, Fraction(1, 2)), 2: (0, Fraction(1, 2))}
    U_ = {1: (0, Fraction(3, 4)), 2: (0, Fraction(3, 4)), 1001: (0, Fraction(1, 2)), 1002: (0, Fraction(1, 2))}
    # the straight homotopy to (x2, x1) reaches the bound b = 1/2 exactly at a corner
    assert restriction_hom(mixed, V, U_, sec("0", "0"), sec("x2", "x1")).report.ok
    with pytest.raises(AlgebroidError, match="not contained in U"):
        restriction_hom(mixed, V, U_, sec("0", "0"), sec("1", "1/2"))
    with pytest.raises(AlgebroidError, match="V is not contained"):
        restriction_hom(mixed, U_, V, sec("0", "0"), sec("0", "0"))


def test_point_pullback_is_bivector_at_base_point():
    # the zero section has no y-derivative, so the mixed part does not contribute
    assert pullback_family(FoliatedChart(VARYING, 2), [parse("0")], 0) == sigma(2, 0, {"12|": "h*x2"})
