"""Cross-sections of a foliated chart N = M0 x R^k (leaves {y} x R^k).

A chart carries a Hamiltonian family sigma on M0 parametrized by R^k.  Maps
of graph type f(y, p) = (y, Phi(y, p)) pull the graph Dirac structure back
to M0 x B' for a parameter cube B'; the pullback is again the graph of a
Hamiltonian family, which is then quantized and transported.

With image(c) = K^T c for c in T*M + TB (see :func:`diracq.dirac.sigma_to_graph`),
the backward image is parametrized by c' = (xi', w) through

    A c = R c',   A = 1 + [J_y^T K[:,B]^T ; -J_y K[:,M]^T],   R = diag(1, J_p)

and has image R^T K^T c, so K' = R^T A^-T K R.  A is unipotent at h = 0,
so its inverse is an h-adic polynomial series and no denominators appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import comb
from fractions import Fraction
from typing import Mapping, Sequence

from .dirac import GRAPH_SIGN, OMEGA_SIGN, lemma2_degree_check
from .exactalg import H, S, T, U, ExactAlgError, Poly, bvar, grid_points, scalar, xvar
from .family import TightFamily, quantize_family
from .geom import MixedMultivector, bivector_matrix, from_bivector_matrix, mc_residual_L
from .holonomy import (CheckReport, DiskB, HolonomyElement, PathB, Transport, disk_holonomy,
                       relation1_check, transport, transport_chain, _point)
from .star import StarProduct

__all__ = [
    "AlgebroidError",
    "FoliatedChart",
    "CrossSection",
    "SectionHomotopy",
    "HomDatum",
    "pullback_family",
    "quantize_section",
    "hom_build",
    "hom_identify",
    "restriction_hom",
    "triangle_coherence",
    "nesting_coherence",
    "Coherence",
    "Identification",
]

PARAMS = {0: (), 1: (T,), 2: (S, U), 3: (T, S, U)}


class AlgebroidError(ExactAlgError):
    pass


@dataclass(frozen=True)
class FoliatedChart:
    sigma: MixedMultivector
    order: int
    box: Mapping = field(default_factory=dict)  # var -> (lo, hi) over y and b
    degree_bound: int | None = None
    order_bound: int | None = None

    def __post_init__(self):
        rep = lemma2_degree_check(self.sigma)
        if not rep.ok:
            raise AlgebroidError("chart family fails the degree conditions: " + "; ".join(rep.violations))
        res = mc_residual_L(self.sigma, self.order)
        if not res.is_zero():
            raise AlgebroidError(f"chart family is not Maurer-Cartan: residual {res}")
        box = {v: (Fraction(lo), Fraction(hi)) for v, (lo, hi) in dict(self.box).items()}
        for v in self.ycoords() + self.bcoords():
            box.setdefault(v, (Fraction(0), Fraction(1)))
        object.__setattr__(self, "box", box)

    @property
    def m0(self) -> int:
        return self.sigma.m

    @property
    def k(self) -> int:
        return self.sigma.k

    def ycoords(self) -> list[int]:
        return [xvar(i) for i in range(1, self.m0 + 1)]

    def bcoords(self) -> list[int]:
        return [bvar(j) for j in range(1, self.k + 1)]

    def ybox(self) -> dict:
        return {v: self.box[v] for v in self.ycoords()}

    def bbox(self) -> dict:
        return {v: self.box[v] for v in self.bcoords()}


def _polys(components, allowed: set, what: str) -> tuple:
    out = tuple(scalar(c) for c in components)
    for c in out:
        if not isinstance(c, Poly):
            raise AlgebroidError(f"{what} must be polynomial")
        extra = c.variables() - allowed
        if extra:
            raise AlgebroidError(f"{what} depends on unexpected variables")
    return out


@dataclass(frozen=True)
class CrossSection:
    phi: tuple  # k polynomials in y

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(scalar(c) for c in self.phi))

    def as_map(self) -> tuple:
        return self.phi


@dataclass(frozen=True)
class SectionHomotopy:
    phi: tuple  # k polynomials in (y, t)

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(scalar(c) for c in self.phi))

    def at(self, t) -> CrossSection:
        return CrossSection(tuple(c.subs({T: scalar(t)}) for c in self.phi))

    @classmethod
    def straight(cls, X: CrossSection, Y: CrossSection) -> "SectionHomotopy":
        t = Poly.var(T)
        return cls(tuple(a + (b - a) * t for a, b in zip(X.phi, Y.phi)))

    @classmethod
    def constant(cls, X: CrossSection) -> "SectionHomotopy":
        return cls(X.phi)

    def reverse(self) -> "SectionHomotopy":
        return SectionHomotopy(tuple(c.subs({T: 1 - Poly.var(T)}) for c in self.phi))


# pullback

def _matmul(A, B, order):
    n, l, m = len(A), len(B), len(B[0]) if B else 0
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = Poly()
            for r in range(l):
                if A[i][r].is_zero() or B[r][j].is_zero():
                    continue
                acc = acc + A[i][r] * B[r][j]
            row.append(acc.truncate(order))
        out.append(row)
    return out


def _transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def _eye(n):
    return [[Poly.const(1) if i == j else Poly() for j in range(n)] for i in range(n)]


def _inverse_unipotent(A, order):
    """Inverse of a matrix whose h = 0 part is unipotent, modulo h^(order+1)."""
    n = len(A)
    A0 = [[c.coeff(H, 0) for c in row] for row in A]
    N0 = [[A0[i][j] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    # (1 + N0)^-1 by the finite Neumann series (N0 nilpotent)
    inv0 = _eye(n)
    power = _eye(n)
    for _ in range(n):
        power = [[-c for c in row] for row in _matmul(power, N0, None)]
        if all(c.is_zero() for row in power for c in row):
            break
        inv0 = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(inv0, power)]
    check = _matmul(A0, inv0, None)
    if check != _eye(n):
        raise AlgebroidError("pullback matrix is not unipotent at h = 0")
    rest = [[(A[i][j] - A0[i][j]).truncate(order) for j in range(n)] for i in range(n)]
    step = [[-c for c in row] for row in _matmul(inv0, rest, order)]
    total = inv0
    term = inv0
    for _ in range(order):
        term = _matmul(step, term, order)
        if all(c.is_zero() for row in term for c in row):
            break
        total = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(total, term)]
    return total


def _graph_matrix(sigma: MixedMultivector):
    m = sigma.m
    Smat = bivector_matrix(sigma)
    n = len(Smat)
    return [[Smat[a][b] * (GRAPH_SIGN * OMEGA_SIGN if a >= m and b >= m else GRAPH_SIGN)
             for b in range(n)] for a in range(n)]


def _from_graph_matrix(K, m: int, k: int) -> MixedMultivector:
    n = m + k
    Smat = [[K[a][b] * (GRAPH_SIGN * OMEGA_SIGN if a >= m and b >= m else GRAPH_SIGN)
             for b in range(n)] for a in range(n)]
    for a in range(n):
        for b in range(n):
            if not (Smat[a][b] + Smat[b][a]).is_zero():
                raise AlgebroidError("pulled-back structure is not skew (not a graph)")
    return from_bivector_matrix(m, k, Smat)


def pullback_family(chart: FoliatedChart, phi: Sequence, nparams: int | None = None,
                    params: Sequence[int] | None = None, check: bool = True) -> MixedMultivector:
    """Hamiltonian family on M0 x B' pulled back along (y, p) -> (y, phi(y, p)).

    ``phi`` are k polynomials in y and the parameters (t for B' = I,
    (s, u) for I^2, (t, s, u) for I^3 unless ``params`` is given); the
    parameters become b1, b2, ... of the result.
    """
    if params is None:
        if nparams is None:
            raise AlgebroidError("give nparams or params")
        params = PARAMS[nparams]
    params = tuple(params)
    m, k, kp = chart.m0, chart.k, len(params)
    ys = chart.ycoords()
    Phi = _polys(phi, set(ys) | set(params), "transversal map")
    if len(Phi) != k:
        raise AlgebroidError(f"transversal map needs {k} components")
    order = chart.order
    bsub = {bvar(j): Phi[j - 1] for j in range(1, k + 1)}
    K = [[c.subs(bsub).truncate(order) for c in row] for row in _graph_matrix(chart.sigma)]
    n = m + k
    Jy = [[Phi[j].diff(ys[i]) for i in range(m)] for j in range(k)]  # k x m
    Jp = [[Phi[j].diff(p) for p in params] for j in range(k)]  # k x kp
    KM = [[K[a][b] for b in range(m)] for a in range(n)]  # n x m
    KB = [[K[a][b] for b in range(m, n)] for a in range(n)]  # n x k
    top = _matmul(_transpose(Jy), _transpose(KB), order)  # m x n
    bot = _matmul(Jy, _transpose(KM), order)  # k x n
    A = _eye(n)
    for i in range(m):
        for a in range(n):
            A[i][a] = A[i][a] + top[i][a]
    for j in range(k):
        for a in range(n):
            A[m + j][a] = A[m + j][a] - bot[j][a]
    Ainv = _inverse_unipotent(A, order)
    R = [[Poly.const(1) if (i == j and i < m) else Poly() for j in range(m + kp)] for i in range(n)]
    for j in range(k):
        for p in range(kp):
            R[m + j][m + p] = Jp[j][p]
    Kp = _matmul(_matmul(_matmul(_transpose(R), _transpose(Ainv), order), K, order), R, order)
    rename = {p: Poly.var(bvar(i + 1)) for i, p in enumerate(params)}
    Kp = [[c.subs(rename) for c in row] for row in Kp]
    sigma2 = _from_graph_matrix(Kp, m, kp)
    if check:
        rep = lemma2_degree_check(sigma2)
        if not rep.ok:
            raise AlgebroidError("pullback fails the degree conditions: " + "; ".join(rep.violations))
        res = mc_residual_L(sigma2, order)
        if not res.is_zero():
            raise AlgebroidError(f"pullback is not Maurer-Cartan: residual {res}")
    return sigma2


def _quantize(chart: FoliatedChart, sigma2: MixedMultivector) -> TightFamily:
    return quantize_family(sigma2, chart.order, chart.degree_bound, chart.order_bound)


def quantize_section(chart: FoliatedChart, X: CrossSection) -> StarProduct:
    sigma2 = pullback_family(chart, X.phi, 0)
    return _quantize(chart, sigma2).star_product()


# Hom data

@dataclass(frozen=True)
class HomDatum:
    source: CrossSection
    target: CrossSection
    iso: Transport
    homotopy: SectionHomotopy
    family: TightFamily
    report: CheckReport

    def __call__(self, f):
        return self.iso(f)


def _test_functions(m: int, degree: int):
    from .holonomy import _test_functions as tf
    return tf(m, degree)


def _iso_report(iso: Transport, s1: StarProduct, s2: StarProduct, tests) -> CheckReport:
    rows = []
    for i, f in enumerate(tests):
        for g in tests[i:]:
            r = iso(s1(f, g)) - s2(iso(f), iso(g))
            rows.append((f"({f}, {g})", r))
    bad = tuple((lab, r) for lab, r in rows if not r.is_zero())
    return CheckReport(not bad, bad, "isomorphism")


def hom_build(chart: FoliatedChart, X: CrossSection, Y: CrossSection, h: SectionHomotopy,
              degree: int = 2) -> HomDatum:
    """Transport along the quantized pullback over [0, 1] of a leafwise homotopy."""
    for end, S_ in ((0, X), (1, Y)):
        if h.at(end).phi != tuple(S_.phi):
            raise AlgebroidError(f"homotopy does not start/end at the given sections (t={end})")
    fam = _quantize(chart, pullback_family(chart, h.phi, 1))
    iso = transport(fam, PathB((Poly.var(T),)))
    sX, sY = quantize_section(chart, X), quantize_section(chart, Y)
    f0 = fam.at({1: 0}).correction
    f1 = fam.at({1: 1}).correction
    rows = [("source fiber", f0 != sX.correction), ("target fiber", f1 != sY.correction)]
    if any(bad for _, bad in rows):
        which = ", ".join(lab for lab, bad in rows if bad)
        raise AlgebroidError(f"endpoint fibers differ from the section quantizations ({which})")
    rep = _iso_report(iso, sX, sY, _test_functions(chart.m0, degree))
    return HomDatum(X, Y, iso, h, fam, rep)


@dataclass(frozen=True)
class Identification:
    element: HolonomyElement
    relation1: CheckReport
    family: TightFamily


def hom_identify(chart: FoliatedChart, X: CrossSection, Y: CrossSection, h1: SectionHomotopy,
                 h2: SectionHomotopy, hh: Sequence, degree: int = 2) -> Identification:
    """Holonomy of the pullback over the square of hh(y, s, t): s = 0 is h1,
    s = 1 is h2, t = 0 is X and t = 1 is Y.

    With b1 = t, b2 = s the boundary of the unit square runs h1, then the
    constant edge at Y, then h2 backwards, then the constant edge at X.
    """
    hh = tuple(scalar(c) for c in hh)
    checks = [
        ({S: Poly()}, h1.phi, "s = 0"),
        ({S: Poly.const(1)}, h2.phi, "s = 1"),
        ({T: Poly()}, X.phi, "t = 0"),
        ({T: Poly.const(1)}, Y.phi, "t = 1"),
    ]
    for sub, want, lab in checks:
        got = tuple(c.subs(sub) for c in hh)
        want = tuple(scalar(c) for c in want)
        if got != want:
            raise AlgebroidError(f"homotopy of homotopies has the wrong restriction at {lab}")
    fam = _quantize(chart, pullback_family(chart, hh, params=(T, S)))
    D = DiskB((Poly.var(S), Poly.var(U)))
    a = disk_holonomy(fam, D)
    rep = relation1_check(fam, D, degree=degree)
    return Identification(a, rep, fam)


# restriction to nested boxes

def _bernstein_range(p: Poly, box: dict) -> tuple[Fraction, Fraction]:
    """Enclosure of p over box from its Bernstein coefficients (exact at the
    vertices, so bounds attained at a corner certify)."""
    vars_ = sorted(v for v in p.variables() if v in box)
    shifted = p.subs({v: Poly.const(box[v][0]) + Poly.var(v).scale(box[v][1] - box[v][0]) for v in vars_})
    degs = [shifted.degree([v]) for v in vars_]
    coeffs = {}
    for mono, c in shifted.terms.items():
        e = dict(mono)
        coeffs[tuple(e.get(v, 0) for v in vars_)] = c
    lo = hi = None
    for I in product(*(range(d + 1) for d in degs)):
        b = Fraction(0)
        for J, c in coeffs.items():
            if all(j <= i for j, i in zip(J, I)):
                w = Fraction(1)
                for j, i, d in zip(J, I, degs):
                    w *= Fraction(comb(i, j), comb(d, j))
                b += w * c
        lo = b if lo is None or b < lo else lo
        hi = b if hi is None or b > hi else hi
    return lo, hi


def _inside(p: Poly, box: dict, lo: Fraction, hi: Fraction, depth: int = 8) -> bool:
    a, b = _bernstein_range(p, box)
    if lo <= a and b <= hi:
        return True
    for pt in grid_points(box, 2):
        v = p.evaluate(dict(pt))
        if v < lo or v > hi:
            return False
    if depth == 0:
        raise AlgebroidError("cannot certify containment of the homotopy")
    var = max(box, key=lambda v: box[v][1] - box[v][0])
    l, r = box[var]
    mid = (l + r) / 2
    return all(_inside(p, {**box, var: half}, lo, hi, depth - 1) for half in ((l, mid), (mid, r)))


def _check_contained(h: SectionHomotopy, ybox: dict, bbox: dict):
    box = dict(ybox)
    box[T] = (Fraction(0), Fraction(1))
    for j, c in enumerate(h.phi, start=1):
        lo, hi = bbox[bvar(j)]
        if not _inside(c, box, lo, hi):
            raise AlgebroidError("homotopy not contained in U")


def _box_within(inner: Mapping, outer: Mapping) -> bool:
    return all(outer[v][0] <= lo and hi <= outer[v][1] for v, (lo, hi) in inner.items() if v in outer)


def restriction_hom(chart: FoliatedChart, V: Mapping, U_: Mapping, X: CrossSection, Y: CrossSection,
                    degree: int = 2) -> HomDatum:
    """HomDatum along the straight leafwise homotopy from X (over V) to Y,
    which must stay inside U."""
    V = {v: (Fraction(lo), Fraction(hi)) for v, (lo, hi) in V.items()}
    U_ = {v: (Fraction(lo), Fraction(hi)) for v, (lo, hi) in U_.items()}
    if not _box_within(V, U_):
        raise AlgebroidError("V is not contained in U")
    ys = chart.ycoords()
    bs = chart.bcoords()
    ybox = {v: V.get(v, chart.box[v]) for v in ys}
    Ub = {v: U_.get(v, chart.box[v]) for v in bs}
    h = SectionHomotopy.straight(X, Y)
    _check_contained(h, ybox, Ub)
    return hom_build(chart, X, Y, h, degree)


@dataclass(frozen=True)
class Coherence:
    element: HolonomyElement
    report: CheckReport


def _triangle(chart: FoliatedChart, X: CrossSection, Y: CrossSection, Z: CrossSection,
              xy: HomDatum, yz: HomDatum, xz: HomDatum, degree: int) -> Coherence:
    s, u = Poly.var(S), Poly.var(U)
    Psi = tuple(x + s * (y - x) + u * (z - y) for x, y, z in zip(X.phi, Y.phi, Z.phi))
    fam = _quantize(chart, pullback_family(chart, Psi, params=(S, U)))
    a = disk_holonomy(fam, DiskB((s, s * u)))
    sX = quantize_section(chart, X)
    rows = []
    for f in _test_functions(chart.m0, degree):
        rows.append((str(f), yz(xy(f)) - xz(a.conjugate(f, sX))))
    bad = tuple((lab, r) for lab, r in rows if not r.is_zero())
    return Coherence(a, CheckReport(not bad, bad, str(a)))


def triangle_coherence(chart: FoliatedChart, X: CrossSection, Y: CrossSection, Z: CrossSection,
                       degree: int = 2) -> Coherence:
    """Compare iso(Y->Z) o iso(X->Y) with iso(X->Z) o Ad(a) exactly, where a is
    the holonomy of the affine filling Psi(s,u) = X + s(Y - X) + u(Z - Y)
    over the triangle D(s,u) = (s, s u)."""
    xy = hom_build(chart, X, Y, SectionHomotopy.straight(X, Y), degree)
    yz = hom_build(chart, Y, Z, SectionHomotopy.straight(Y, Z), degree)
    xz = hom_build(chart, X, Z, SectionHomotopy.straight(X, Z), degree)
    return _triangle(chart, X, Y, Z, xy, yz, xz, degree)


def nesting_coherence(chart: FoliatedChart, V: Mapping, U_: Mapping, W: Mapping,
                      X: CrossSection, Y: CrossSection, Z: CrossSection,
                      degree: int = 2) -> Coherence:
    """Functoriality of restriction_hom over V in U in W: the composite of the
    two restrictions equals the direct one up to the inner identification."""
    xy = restriction_hom(chart, V, U_, X, Y, degree)
    yz = restriction_hom(chart, U_, W, Y, Z, degree)
    xz = restriction_hom(chart, V, W, X, Z, degree)
    return _triangle(chart, X, Y, Z, xy, yz, xz, degree)
