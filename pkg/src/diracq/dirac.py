"""Linear Dirac geometry on a coordinate chart N = R^m x R^k.

Sections of (T + T*)N are pairs (u, alpha) of coefficient lists over the
chart coordinates (x1..xm, b1..bk).  The bracket is the Dorfman form
``[u, v] + L_u beta - i_v d alpha``.

Closure of a frame is decided through the Courant tensor
``<[[e_i, e_j]], e_k>``: for a maximal isotropic frame ``v`` lies in the
span iff it pairs to zero with every frame element, so no division is
needed even when coefficients are rational functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exactalg import H, ExactAlgError, Poly, bvar, check_denominator, grid_points, matrix_rank, scalar, xvar
from .geom import MixedMultivector, bivector_matrix, mc_residual_L

__all__ = [
    "DiracError",
    "GenSection",
    "DiracFrame",
    "DiracReport",
    "GRAPH_SIGN",
    "OMEGA_SIGN",
    "chart_coords",
    "pairing",
    "courant",
    "is_dirac",
    "sigma_to_graph",
    "lemma1_equivalence",
    "lemma2_degree_check",
]

# graph(sigma) = {(sigma(c, .), c)} with the T*B <- TB block (the 2-form
# part) scaled by OMEGA_SIGN; calibrated against the Maurer-Cartan equation
# (see tests/test_dirac.py::test_lemma1_calibration)
GRAPH_SIGN = 1
OMEGA_SIGN = -1


class DiracError(ExactAlgError):
    pass


def chart_coords(m: int, k: int) -> tuple[int, ...]:
    return tuple(xvar(i) for i in range(1, m + 1)) + tuple(bvar(j) for j in range(1, k + 1))


@dataclass(frozen=True)
class GenSection:
    coords: tuple
    vector: tuple
    covector: tuple

    def __post_init__(self):
        n = len(self.coords)
        if len(self.vector) != n or len(self.covector) != n:
            raise DiracError("section components must match the chart dimension")
        object.__setattr__(self, "vector", tuple(scalar(c) for c in self.vector))
        object.__setattr__(self, "covector", tuple(scalar(c) for c in self.covector))

    @classmethod
    def of(cls, m: int, k: int, vector=None, covector=None) -> "GenSection":
        coords = chart_coords(m, k)
        n = len(coords)
        vector = list(vector or [0] * n)
        covector = list(covector or [0] * n)
        return cls(coords, tuple(vector), tuple(covector))

    def __add__(self, other):
        return GenSection(self.coords, tuple(a + b for a, b in zip(self.vector, other.vector)),
                          tuple(a + b for a, b in zip(self.covector, other.covector)))

    def __sub__(self, other):
        return GenSection(self.coords, tuple(a - b for a, b in zip(self.vector, other.vector)),
                          tuple(a - b for a, b in zip(self.covector, other.covector)))

    def scale(self, c):
        c = scalar(c)
        return GenSection(self.coords, tuple(a * c for a in self.vector), tuple(a * c for a in self.covector))

    def truncate(self, order):
        if order is None:
            return self
        return GenSection(self.coords, tuple(a.truncate(order) for a in self.vector),
                          tuple(a.truncate(order) for a in self.covector))

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.vector + self.covector)

    def __str__(self):
        return f"(vector={[str(c) for c in self.vector]}, covector={[str(c) for c in self.covector]})"


def pairing(a: GenSection, b: GenSection):
    """<(u, alpha), (v, beta)> = alpha(v) + beta(u)."""
    if a.coords != b.coords:
        raise DiracError("sections live on different charts")
    total = Poly()
    for i in range(len(a.coords)):
        total = total + a.covector[i] * b.vector[i] + b.covector[i] * a.vector[i]
    return total


def courant(a: GenSection, b: GenSection) -> GenSection:
    if a.coords != b.coords:
        raise DiracError("sections live on different charts")
    z = a.coords
    n = len(z)
    u, alpha = a.vector, a.covector
    v, beta = b.vector, b.covector
    vec = []
    for i in range(n):
        acc = Poly()
        for c in range(n):
            if not u[c].is_zero():
                acc = acc + u[c] * v[i].diff(z[c])
            if not v[c].is_zero():
                acc = acc - v[c] * u[i].diff(z[c])
        vec.append(acc)
    cov = []
    for i in range(n):
        acc = Poly()
        for c in range(n):
            # L_u beta
            if not u[c].is_zero():
                acc = acc + u[c] * beta[i].diff(z[c])
            if not beta[c].is_zero():
                acc = acc + beta[c] * u[c].diff(z[i])
            # - i_v d alpha
            if not v[c].is_zero():
                acc = acc - v[c] * (alpha[i].diff(z[c]) - alpha[c].diff(z[i]))
        cov.append(acc)
    return GenSection(z, tuple(vec), tuple(cov))


@dataclass(frozen=True)
class DiracFrame:
    sections: tuple
    box: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        if not self.sections:
            raise DiracError("empty frame")
        coords = self.sections[0].coords
        if any(s.coords != coords for s in self.sections):
            raise DiracError("frame sections live on different charts")
        if len(self.sections) != len(coords):
            raise DiracError(f"a Dirac frame needs {len(coords)} sections, got {len(self.sections)}")

    @property
    def coords(self):
        return self.sections[0].coords


@dataclass(frozen=True)
class DiracReport:
    ok: bool
    message: str
    residual: object = None
    where: tuple | None = None

    def __bool__(self):
        return self.ok


def _default_box(coords):
    return {v: (Fraction(0), Fraction(1)) for v in coords}


def _validate_rank(frame: DiracFrame, grid: int):
    coords = frame.coords
    n = len(coords)
    box = dict(frame.box) or _default_box(coords)
    for s in frame.sections:
        for c in s.vector + s.covector:
            if not isinstance(c, Poly):
                check_denominator(c.den.subs({H: Poly()}), box, grid)
    for pt in grid_points(box, grid):
        pt = dict(pt)
        pt[H] = Fraction(0)
        rows = [[c.evaluate(pt) for c in s.vector + s.covector] for s in frame.sections]
        if matrix_rank(rows) < n:
            where = ", ".join(f"{v}={pt[v]}" for v in sorted(pt) if v != H)
            raise DiracError(f"degenerate frame: rank drops at ({where})")


def is_dirac(frame: DiracFrame, order: int | None = None, grid: int = 4) -> DiracReport:
    """Decide maximal isotropy and Courant closure of ``frame`` exactly
    (modulo h^(order+1) when ``order`` is given)."""
    _validate_rank(frame, grid)
    secs = frame.sections
    for i, a in enumerate(secs):
        for j in range(i, len(secs)):
            p = pairing(a, secs[j])
            if order is not None:
                p = p.truncate(order)
            if not p.is_zero():
                return DiracReport(False, f"not isotropic: <e{i + 1}, e{j + 1}> = {p}", p, (i, j))
    for i, a in enumerate(secs):
        for j, b in enumerate(secs):
            if j <= i:
                # the tensor is skew in (i, j) on an isotropic frame
                continue
            br = courant(a, b)
            for kk, c in enumerate(secs):
                t = pairing(br, c)
                if order is not None:
                    t = t.truncate(order)
                if not t.is_zero():
                    return DiracReport(False, f"not closed: <[[e{i + 1}, e{j + 1}]], e{kk + 1}> = {t}",
                                       t, (i, j, kk))
    return DiracReport(True, "Dirac")


def sigma_to_graph(sigma: MixedMultivector, box: dict | None = None) -> DiracFrame:
    """Frame of the graph of c -> sigma(c, .) from T*M + TB to TM + T*B.

    The frame element for a basis covector dx_i (resp. basis vector d/db_j)
    has that basis element as its T*M (resp. TB) component.
    """
    if sigma.terms and sigma.total_degree() != 2:
        raise DiracError("sigma must have total degree 2")
    m, k = sigma.m, sigma.k
    n = m + k
    S = bivector_matrix(sigma)
    coords = chart_coords(m, k)
    zero = Poly()
    sections = []
    for a in range(n):
        image = [S[a][b] * (GRAPH_SIGN * OMEGA_SIGN if a >= m and b >= m else GRAPH_SIGN)
                 for b in range(n)]
        vector = [zero] * n
        covector = [zero] * n
        for b in range(m):
            vector[b] = image[b]
        for b in range(m, n):
            covector[b] = image[b]
        if a < m:
            covector[a] = Poly.const(1)
        else:
            vector[a] = Poly.const(1)
        sections.append(GenSection(coords, tuple(vector), tuple(covector)))
    return DiracFrame(tuple(sections), dict(box or {}))


@dataclass(frozen=True)
class Lemma1Report:
    mc_zero: bool
    dirac: bool
    mc_residual: MixedMultivector
    dirac_report: DiracReport

    @property
    def agree(self) -> bool:
        return self.mc_zero == self.dirac


def lemma1_equivalence(sigma: MixedMultivector, order: int | None = None, box=None, grid: int = 4) -> Lemma1Report:
    res = mc_residual_L(sigma, order)
    rep = is_dirac(sigma_to_graph(sigma, box), order, grid)
    return Lemma1Report(res.is_zero(), rep.ok, res, rep)


@dataclass(frozen=True)
class Lemma2Report:
    ok: bool
    violations: tuple
    leafwise_form: MixedMultivector | None
    leaf_dirac: bool | None

    def __bool__(self):
        return self.ok


def lemma2_degree_check(sigma, grid: int = 4) -> Lemma2Report:
    """Check that the (2,0) and (1,1) parts are O(h) and that the h = 0 part
    is a closed leafwise 2-form (Dirac structure with leaves {x} x B)."""
    sigma = getattr(sigma, "sigma", sigma)
    violations = []
    for (I, J), c in sigma.sorted_terms():
        if len(I) + len(J) != 2:
            violations.append(f"term of bidegree ({len(I)},{len(J)}) in a degree-2 element")
            continue
        if I and c.coeff(H, 0) and not c.coeff(H, 0).is_zero():
            basis = "^".join([f"d{i}" for i in I] + [f"db{j}" for j in J])
            violations.append(f"h^0 coefficient {c.coeff(H, 0)} on {basis} ({len(I)},{len(J)}) part")
    if violations:
        return Lemma2Report(False, tuple(violations), None, None)
    sigma0 = sigma.hcoeff(0)
    leaf_ok = is_dirac(sigma_to_graph(sigma0), None, grid).ok
    if not leaf_ok:
        violations.append(f"h^0 part {sigma0} is not a closed leafwise 2-form")
    return Lemma2Report(not violations, tuple(violations), sigma0, leaf_ok)
