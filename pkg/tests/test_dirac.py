import random
from fractions import Fraction
from itertools import combinations

import pytest

from conftest import sigma
from diracq.dirac import (DiracError, DiracFrame, GenSection, courant, is_dirac, lemma1_equivalence,
                          lemma2_degree_check, pairing, sigma_to_graph)
from diracq.exactalg import Poly, parse
from diracq.geom import mc_residual_L
from diracq.randgen import rand_section, rand_sigma


def sec(m, k, vector, covector):
    return GenSection.of(m, k, [parse(v) for v in vector], [parse(c) for c in covector])


def test_pairing_and_bracket_examples():
    # on R^1: (x d/dx, 0) and (0, dx)
    a = sec(1, 0, ["x1"], ["0"])
    b = sec(1, 0, ["0"], ["1"])
    assert pairing(a, b) == parse("x1")
    assert pairing(a, a).is_zero()
    # [[u, v]] = [u, v] for vector fields, L_u dx = dx for u = x d/dx
    assert courant(a, sec(1, 0, ["x1^2"], ["0"])) == sec(1, 0, ["x1^2"], ["0"])
    assert courant(a, b) == sec(1, 0, ["0"], ["1"])
    # -i_v d alpha with alpha = x2 dx1, v = d/dx1: -i_v(dx2^dx1) = dx2
    c = sec(2, 0, ["1", "0"], ["0", "0"])
    d = sec(2, 0, ["0", "0"], ["x2", "0"])
    assert courant(d, c) == sec(2, 0, ["0", "0"], ["0", "1"])


def test_pairing_rejects_other_chart():
    with pytest.raises(DiracError):
        pairing(GenSection.of(1, 0), GenSection.of(2, 0))


def _d(f, coords):
    return GenSection(coords, tuple([Poly()] * len(coords)), tuple(f.diff(z) for z in coords))


@pytest.mark.parametrize("m,k", [(1, 1), (2, 1), (2, 2)])
def test_courant_leibniz_and_symmetric_part(m, k):
    r = random.Random(100 * m + k)
    nonzero = 0
    for _ in range(15):
        a, b, c = (rand_section(r, m, k) for _ in range(3))
        nonzero += not courant(a, b).is_zero()
        lhs = courant(a, courant(b, c))
        rhs = courant(courant(a, b), c) + courant(b, courant(a, c))
        assert (lhs - rhs).is_zero()
        sym = courant(a, a) - _d(pairing(a, a), a.coords).scale(Fraction(1, 2))
        assert sym.is_zero()
    assert nonzero >= 10


def test_is_dirac_examples():
    # graph of a constant Poisson bivector and of a closed 2-form
    assert is_dirac(sigma_to_graph(sigma(2, 0, {"12|": "1"})))
    assert is_dirac(sigma_to_graph(sigma(0, 3, {"|12": "b1 + b2", "|23": "b2"})))
    # TM itself
    frame = DiracFrame((sec(2, 0, ["1", "0"], ["0", "0"]), sec(2, 0, ["0", "1"], ["0", "0"])))
    assert is_dirac(frame)


def test_is_dirac_reports_failures():
    iso = DiracFrame((sec(1, 0, ["1"], ["1"]),))
    rep = is_dirac(iso)
    assert not rep and rep.message.startswith("not isotropic")
    # graph of a non-closed 2-form b1 db2^db3 + ... is not involutive
    rep = is_dirac(sigma_to_graph(sigma(0, 3, {"|23": "b1"})))
    assert not rep and rep.message.startswith("not closed")


def test_degenerate_frame_is_rejected():
    frame = DiracFrame((sec(2, 0, ["1", "0"], ["0", "0"]), sec(2, 0, ["x1", "0"], ["0", "0"])))
    with pytest.raises(DiracError, match="rank drops"):
        is_dirac(frame)
    with pytest.raises(DiracError, match="needs 2 sections"):
        DiracFrame((sec(2, 0, ["1", "0"], ["0", "0"]),))


def test_sigma_to_graph_shape():
    s = sigma(2, 1, {"12|": "h*x1", "1|1": "h", "|": "0"})
    frame = sigma_to_graph(s)
    assert len(frame.sections) == 3
    e1 = frame.sections[0]
    assert e1.covector[0] == Poly.const(1)
    assert e1.vector[1] == parse("h*x1")
    # the db1-section carries d/db1 plus the image of sigma
    e3 = frame.sections[2]
    assert e3.vector[2] == Poly.const(1)


# sign relating <[[e_a, e_b]], e_c> on the graph frame to the component of
# the Maurer-Cartan residual, by the number of parameter directions
TENSOR_SIGN = {0: -1, 1: 1, 2: 1, 3: -1}


def test_graph_tensor_equals_mc_residual():
    r = random.Random(5)
    seen = set()
    for _ in range(25):
        m, k = r.randint(1, 3), r.randint(1, 3)
        s = rand_sigma(r, m, k, degree=1, terms=2)
        res = mc_residual_L(s)
        F = sigma_to_graph(s).sections
        for a, b, c in combinations(range(m + k), 3):
            T = pairing(courant(F[a], F[b]), F[c])
            I = tuple(i + 1 for i in (a, b, c) if i < m)
            J = tuple(i - m + 1 for i in (a, b, c) if i >= m)
            R = res.terms.get((I, J), Poly())
            assert T == R.scale(TENSOR_SIGN[len(J)])
            if not T.is_zero():
                seen.add(len(J))
    assert seen == {0, 1, 2, 3}


CURATED = {
    "const_pi_with_form": sigma(2, 2, {"12|": "h", "|12": "1 + b1*b2 + b2^2"}),
    "heisenberg": sigma(3, 0, {"12|": "h*x3"}),
    "sl2": sigma(3, 0, {"12|": "2*h*x2", "13|": "-2*h*x3", "23|": "h*x1"}),
    "mixed_inner": sigma(2, 2, {"12|": "h", "2|1": "-h*x1", "2|2": "h", "|12": "h*b1"}),
    "curved": sigma(2, 2, {"12|": "h", "2|1": "-h*x1", "2|2": "h^2*b1", "|12": "1 + b1 + h*x1"}),
    "e2_type": sigma(3, 0, {"12|": "h*x3", "23|": "h*x1"}),
    "compensated": sigma(2, 1, {"12|": "h + h^2/(1+b1)",
                                "1|1": "h*x1/(1+b1)^2*(1 - h/(1+b1) + h^2/(1+b1)^2)"}),
}


@pytest.mark.parametrize("name", sorted(CURATED))
def test_lemma1_on_solutions(name):
    rep = lemma1_equivalence(CURATED[name], order=2)
    assert rep.mc_zero and rep.dirac and rep.agree


def test_lemma1_on_non_solutions():
    bad = sigma(3, 0, {"12|": "h*x3", "13|": "h*x1"})
    rep = lemma1_equivalence(bad, order=2)
    assert not rep.mc_zero and not rep.dirac and rep.agree
    assert str(rep.mc_residual) == str(sigma(3, 0, {"123|": "-x3*h^2"}))
    perturbed = sigma(2, 1, {"12|": "h + h^2/(1+b1)", "1|1": "2*h*x1/(1+b1)^2"})
    rep = lemma1_equivalence(perturbed, order=2)
    assert not rep.mc_zero and rep.agree


def test_lemma1_random_agree():
    r = random.Random(77)
    for _ in range(10):
        rep = lemma1_equivalence(rand_sigma(r, 2, 1), order=2)
        assert rep.agree


def test_lemma2_examples():
    assert lemma2_degree_check(CURATED["curved"])
    rep = lemma2_degree_check(sigma(2, 1, {"12|": "x1", "1|1": "h"}))
    assert not rep and "h^0 coefficient" in rep.violations[0]
    rep = lemma2_degree_check(sigma(0, 3, {"|23": "b1"}))
    assert not rep and "not a closed leafwise" in rep.violations[0]
