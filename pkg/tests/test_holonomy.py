import random
from fractions import Fraction

import pytest
import sympy as sp

from conftest import sigma, to_sympy
from diracq.exactalg import Poly, bvar, parse
from diracq.family import TightFamily, gauge_family, quantize_family
from diracq.holonomy import (DiskB, HolonomyError, PathB, disk_holonomy, naturality_check, relation1_check,
                             relation2_check, relation3_check, transport, transport_chain,
                             transport_iso_check)
from diracq.randgen import rand_poly
from diracq.star import PolyDiffOp, moyal

MOYAL = moyal(sigma(2, 0, {"12|": "h"}), 3)
SQUARE = DiskB((parse("s"), parse("u")))
LEFT = DiskB((parse("s/2"), parse("u")))
RIGHT = DiskB((parse("1/2 + s/2"), parse("u")))
BULGED = DiskB((parse("s + s*(1 - s)*u*(1 - u)/2"), parse("u")))


def path(*c):
    return PathB(tuple(parse(x) for x in c))


@pytest.fixture(scope="module")
def shift():
    return gauge_family(MOYAL, [PolyDiffOp(2, 1, {((0, 1),): parse("h")})])


@pytest.fixture(scope="module")
def inner():
    return gauge_family(MOYAL, [parse("h*b2*x1^2 + b1*x2"), parse("h*b1*b2*x1*x2")])


def flat(tau2):
    return TightFamily(2, 2, 3, MOYAL.correction, (PolyDiffOp.zero(2, 1),) * 2, {(1, 2): parse(tau2)})


def test_shift_closed_form(shift):
    F = transport(shift, path("t"))
    assert F(parse("x2")) == parse("x2 - h")
    assert F(parse("x1*x2^2")) == parse("x1*x2^2 - 2*h*x1*x2 + h^2*x1")
    # the answer only depends on the endpoints
    assert transport(shift, path("t^3")).op == F.op
    assert transport(shift, path("2*t"))(parse("x2")) == parse("x2 - 2*h")


def test_inverse_path_and_functoriality(inner):
    g = path("t", "t^2")
    F, Finv = transport(inner, g), transport(inner, g.reverse())
    assert Finv.after(F).is_identity()
    assert F.after(Finv).is_identity()
    split = transport_chain(inner, [g.restrict(0, Fraction(1, 3)), g.restrict(Fraction(1, 3), 1)])
    assert split.op == F.op
    assert transport(inner, g.reparam(parse("(t + t^2)/2"))).op == F.op


def test_transport_is_algebra_isomorphism(inner):
    xs = [parse("x1"), parse("x2"), parse("x1*x2")]
    rep = transport_iso_check(inner, path("1 - t", "t"), [(a, b) for a in xs for b in xs])
    assert rep.ok


def test_transport_rejects_wrong_dimension(inner):
    with pytest.raises(HolonomyError):
        transport(inner, path("t"))


def test_lambda_closed_forms():
    a = disk_holonomy(flat("1"), SQUARE)
    assert a.lam == 1 and a.unital == Poly.const(1)
    a = disk_holonomy(flat("b1"), SQUARE)
    assert a.lam == Fraction(1, 2) and a.unital == Poly.const(1)


def test_lambda_matches_sympy_area_integral():
    # with zero connection the exponent is the integral of the pulled back 2-form
    r = random.Random(41)
    s, u, b1, b2 = sp.symbols("s u b1 b2")
    for _ in range(6):
        g = rand_poly(r, [bvar(1), bvar(2)], degree=2, terms=3)
        disk = DiskB((parse("s + s*u/2"), parse("u + s^2*u")))
        ours = disk_holonomy(flat(str(g)), disk).lam
        X, Y = s + s * u / 2, u + s ** 2 * u
        jac = sp.diff(X, s) * sp.diff(Y, u) - sp.diff(X, u) * sp.diff(Y, s)
        oracle = sp.integrate(to_sympy(g).subs({b1: X, b2: Y}, simultaneous=True) * jac, (s, 0, 1), (u, 0, 1))
        assert sp.Rational(ours.numerator, ours.denominator) == oracle


def test_relations_on_inner_family(inner):
    assert relation1_check(inner, SQUARE)
    assert relation2_check(inner, SQUARE, BULGED)
    assert relation3_check(inner, SQUARE, LEFT, RIGHT)
    assert naturality_check(inner, SQUARE)


def test_relation3_for_lambda_half():
    assert relation3_check(flat("b1"), SQUARE, LEFT, RIGHT)


def test_relation_input_errors(inner):
    with pytest.raises(HolonomyError, match="incompatible boundaries"):
        relation2_check(inner, SQUARE, DiskB((parse("s"), parse("2*u"))))
    with pytest.raises(HolonomyError, match="gluing edge"):
        relation3_check(inner, SQUARE, LEFT, LEFT)
    x_curv = TightFamily(2, 2, 3, MOYAL.correction, (PolyDiffOp.zero(2, 1),) * 2, {(1, 2): parse("x1")})
    with pytest.raises(HolonomyError, match="non-central"):
        disk_holonomy(x_curv, SQUARE)


@pytest.fixture(scope="module")
def curved():
    return quantize_family(sigma(2, 2, {"12|": "h", "2|1": "-h*x1", "2|2": "h^2*b1", "|12": "1 + b1 + h*x1"}), 2)


def test_curved_quantized_family(curved):
    a = disk_holonomy(curved, SQUARE)
    assert a.lam == Fraction(3, 2)
    assert a.unital == parse("1/2*x1^2*h^2 + x1*h + 1")
    assert relation1_check(curved, SQUARE)
    assert relation2_check(curved, SQUARE, BULGED)
    assert relation3_check(curved, SQUARE, LEFT, RIGHT)
    assert naturality_check(curved, SQUARE)
