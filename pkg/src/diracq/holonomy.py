"""Parallel transport along polynomial paths in B and disk holonomy.

Transport along gamma solves ``F' = -V(t) F`` with ``V(t) = sum_j
tau1_j(gamma(t)) gamma_j'(t)``; since V = O(h) the Dyson series stops
after ``order`` terms and every iterated integral is a polynomial one.

The holonomy of a disk D (base corner D(0,0)) is ``a(1)`` for

    a' = a * c(s),   c(s) = int_0^1 Phi_{s,u}^{-1}( tau2(d_s D, d_u D) ) du

where Phi_{s,u} transports along (0,0) -> (s,0) -> (s,u).  The h^0 part of
c is a scalar and is collected in the exponent lambda.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .exactalg import H, S, T, U, ExactAlgError, Poly, bvar, scalar, xvar
from .family import TightFamily
from .star import PolyDiffOp, StarProduct, apply, compose_at, identity_op

__all__ = [
    "HolonomyError",
    "PathB",
    "DiskB",
    "Transport",
    "HolonomyElement",
    "CheckReport",
    "transport",
    "transport_iso_check",
    "disk_holonomy",
    "boundary_transport",
    "relation1_check",
    "relation2_check",
    "relation3_check",
    "naturality_check",
]


class HolonomyError(ExactAlgError):
    pass


@dataclass(frozen=True)
class PathB:
    """Polynomial path t -> (gamma_1(t), ..., gamma_k(t)), t in [0, 1].

    Components may carry extra parameters (s, u) besides t.
    """

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(scalar(c) for c in self.components))
        for c in self.components:
            if not isinstance(c, Poly):
                raise HolonomyError("paths must be polynomial")

    @property
    def k(self) -> int:
        return len(self.components)

    def at(self, t) -> tuple:
        return tuple(c.subs({T: scalar(t)}) for c in self.components)

    def start(self) -> tuple:
        return self.at(0)

    def end(self) -> tuple:
        return self.at(1)

    def reverse(self) -> "PathB":
        return PathB(tuple(c.subs({T: 1 - Poly.var(T)}) for c in self.components))

    def reparam(self, r) -> "PathB":
        """gamma o r for a polynomial r: [0,1] -> [0,1]."""
        return PathB(tuple(c.subs({T: scalar(r)}) for c in self.components))

    def restrict(self, a, b) -> "PathB":
        """The piece over [a, b], run at constant speed over [0, 1]."""
        a, b = scalar(a), scalar(b)
        return self.reparam(a + (b - a) * Poly.var(T))

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"


@dataclass(frozen=True)
class DiskB:
    """Polynomial map (s, u) -> B on the unit square, base corner (0, 0).

    The boundary is run counterclockwise: (0,0) -> (1,0) -> (1,1) -> (0,1).
    """

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(scalar(c) for c in self.components))
        for c in self.components:
            if not isinstance(c, Poly):
                raise HolonomyError("non-polynomial disk data")

    @property
    def k(self) -> int:
        return len(self.components)

    def at(self, s, u) -> tuple:
        return tuple(c.subs({S: scalar(s), U: scalar(u)}) for c in self.components)

    def base(self) -> tuple:
        return self.at(0, 0)

    def edge(self, name: str) -> PathB:
        t = Poly.var(T)
        sub = {
            "bottom": {S: t, U: Poly()},
            "right": {S: Poly.const(1), U: t},
            "top": {S: 1 - t, U: Poly.const(1)},
            "left": {S: Poly(), U: 1 - t},
        }[name]
        return PathB(tuple(c.subs(sub) for c in self.components))

    def boundary(self) -> list[PathB]:
        return [self.edge(e) for e in ("bottom", "right", "top", "left")]


def _point(p) -> dict:
    return {bvar(j): c for j, c in enumerate(p, start=1)}


@dataclass(frozen=True)
class Transport:
    """A 1-ary operator A_source -> A_target, exact modulo h^(order+1)."""

    op: PolyDiffOp
    order: int

    def __call__(self, f):
        return apply(self.op, (scalar(f),), self.order)

    def after(self, other: "Transport") -> "Transport":
        """self o other."""
        return Transport(compose_at(self.op, 0, other.op, self.order).truncate(self.order), self.order)

    def subs(self, mapping) -> "Transport":
        return Transport(self.op.subs(mapping), self.order)

    def is_identity(self) -> bool:
        return self.op == identity_op(self.op.m)


def _generator(Tf: TightFamily, gamma: PathB) -> PolyDiffOp:
    if gamma.k != Tf.k:
        raise HolonomyError(f"path in R^{gamma.k} but the family lives over R^{Tf.k}")
    pt = _point(gamma.components)
    V = PolyDiffOp.zero(Tf.m, 1)
    for j, A in enumerate(Tf.tau1):
        speed = gamma.components[j].diff(T)
        if speed.is_zero() or A.is_zero():
            continue
        V = V + A.subs(pt).map_coeffs(lambda c: c * speed)
    return V.truncate(Tf.order)


def transport(Tf: TightFamily, gamma: PathB) -> Transport:
    """Id + sum_n (-1)^n int_{t1<...<tn} V(tn)...V(t1), exact."""
    H_ = Tf.order
    V = _generator(Tf, gamma)
    ident = identity_op(Tf.m)
    total = ident
    term = ident
    for _ in range(H_):
        if V.is_zero():
            break
        prod = compose_at(V, 0, term, H_)
        term = prod.map_coeffs(lambda c: -c.integrate(T))
        if term.is_zero():
            break
        total = total + term
    total = total.map_coeffs(lambda c: c.subs({T: Poly.const(1)}))
    return Transport(total.truncate(H_), H_)


def transport_chain(Tf: TightFamily, paths: Sequence[PathB]) -> Transport:
    """Transport along gamma_1 then gamma_2 ... (composition T_n o ... o T_1)."""
    out = Transport(identity_op(Tf.m), Tf.order)
    for g in paths:
        out = transport(Tf, g).after(out)
    return out


@dataclass(frozen=True)
class CheckReport:
    ok: bool
    residuals: tuple = ()  # ((label, residual), ...) of the nonzero entries
    detail: str = ""

    def __bool__(self):
        return self.ok


def _report(rows, detail="") -> CheckReport:
    bad = tuple((lab, r) for lab, r in rows if not r.is_zero())
    return CheckReport(not bad, bad, detail)


def transport_iso_check(Tf: TightFamily, gamma: PathB, pairs: Sequence) -> CheckReport:
    """T(f *_b1 g) - T f *_b2 T g on each pair."""
    F = transport(Tf, gamma)
    s1 = StarProduct(Tf.tau0.subs(_point(gamma.start())), Tf.order)
    s2 = StarProduct(Tf.tau0.subs(_point(gamma.end())), Tf.order)
    rows = []
    for f, g in pairs:
        f, g = scalar(f), scalar(g)
        r = F(s1(f, g)) - s2(F(f), F(g))
        rows.append((f"({f}, {g})", r))
    return _report(rows)


@dataclass(frozen=True)
class HolonomyElement:
    """e^lam * unital, with unital = 1 + O(h)."""

    lam: Fraction
    unital: Poly
    order: int

    def mul(self, other: "HolonomyElement", star: StarProduct) -> "HolonomyElement":
        return HolonomyElement(self.lam + other.lam, star(self.unital, other.unital), self.order)

    def conjugate(self, f, star: StarProduct):
        """unital * f * unital^-1 (the scalar factor cancels)."""
        return star(star(self.unital, f), star.inverse(self.unital))

    def __eq__(self, other):
        if not isinstance(other, HolonomyElement):
            return NotImplemented
        return self.lam == other.lam and (self.unital - other.unital).truncate(self.order).is_zero()

    def __hash__(self):
        return hash((self.lam, self.unital.truncate(self.order)))

    def __str__(self):
        return f"exp({self.lam}) * ({self.unital})"


def _check_central(Tf: TightFamily):
    xs = [xvar(i) for i in range(1, Tf.m + 1)]
    for key, f in Tf.tau2.items():
        if f.coeff(H, 0).depends_on(xs):
            raise HolonomyError(f"non-central classical curvature: tau2{key} has h^0 part {f.coeff(H, 0)}")


def _column_paths(D: DiskB) -> tuple[PathB, PathB]:
    """(0,0) -> (s,0) and (s,0) -> (s,u), with s, u symbolic."""
    t = Poly.var(T)
    first = PathB(tuple(c.subs({S: t * Poly.var(S), U: Poly()}) for c in D.components))
    second = PathB(tuple(c.subs({U: t * Poly.var(U)}) for c in D.components))
    return first, second


def _curvature_density(Tf: TightFamily, D: DiskB) -> Poly:
    ds = [c.diff(S) for c in D.components]
    du = [c.diff(U) for c in D.components]
    pt = _point(D.components)
    out = Poly()
    for (i, j), f in Tf.tau2.items():
        jac = ds[i - 1] * du[j - 1] - ds[j - 1] * du[i - 1]
        if not jac.is_zero():
            out = out + f.subs(pt) * jac
    return out.truncate(Tf.order)


def disk_holonomy(Tf: TightFamily, D: DiskB) -> HolonomyElement:
    if D.k != Tf.k:
        raise HolonomyError(f"disk in R^{D.k} but the family lives over R^{Tf.k}")
    _check_central(Tf)
    H_ = Tf.order
    first, second = _column_paths(D)
    # Phi_{s,u}^{-1}: back down the column, then back along the bottom
    back = transport(Tf, first.reverse()).after(transport(Tf, second.reverse()))
    c = back(_curvature_density(Tf, D)).integrate01(U)
    c0 = c.coeff(H, 0)
    if c0.depends_on([xvar(i) for i in range(1, Tf.m + 1)]):
        raise HolonomyError(f"non-central classical curvature: column density {c0}")
    lam = c0.integrate01(S)
    if not lam.is_const():
        raise HolonomyError(f"non-polynomial or parameter-dependent holonomy exponent {lam}")
    rest = (c - c0).truncate(H_)
    star = StarProduct(Tf.tau0.subs(_point(D.base())), H_)
    w = Poly.const(1)
    for _ in range(H_):
        w = (1 + star(w, rest).integrate(S)).truncate(H_)
    return HolonomyElement(lam.const_value(), w.subs({S: Poly.const(1)}).truncate(H_), H_)


def boundary_transport(Tf: TightFamily, D: DiskB) -> Transport:
    return transport_chain(Tf, D.boundary())


def _test_functions(m: int, degree: int):
    from .family import _monomials
    monos = sorted(_monomials([xvar(i) for i in range(1, m + 1)], degree),
                   key=lambda mo: (sum(e for _, e in mo), mo))
    return [Poly.monomial(mo) for mo in monos]


def relation1_check(Tf: TightFamily, D: DiskB, tests: Sequence | None = None, degree: int = 2) -> CheckReport:
    """T_{boundary D}(f) - u * f * u^-1 on test functions."""
    a = disk_holonomy(Tf, D)
    F = boundary_transport(Tf, D)
    star = StarProduct(Tf.tau0.subs(_point(D.base())), Tf.order)
    tests = _test_functions(Tf.m, degree) if tests is None else [scalar(f) for f in tests]
    rows = [(str(f), F(f) - a.conjugate(f, star)) for f in tests]
    return _report(rows, str(a))


def relation2_check(Tf: TightFamily, D: DiskB, D2: DiskB) -> CheckReport:
    """Holonomy is unchanged under a change of the disk rel boundary."""
    for corner in ((0, 0), (1, 0), (1, 1), (0, 1)):
        if D.at(*corner) != D2.at(*corner):
            raise HolonomyError(f"incompatible boundaries at corner {corner}")
    a, b = disk_holonomy(Tf, D), disk_holonomy(Tf, D2)
    return _element_report(a, b)


def _element_report(a: HolonomyElement, b: HolonomyElement, detail: str = "") -> CheckReport:
    rows = [("lambda", Poly.const(a.lam - b.lam)), ("unital", (a.unital - b.unital).truncate(a.order))]
    return _report(rows, detail or f"{a} vs {b}")


def relation3_check(Tf: TightFamily, D: DiskB, D1: DiskB, D2: DiskB) -> CheckReport:
    """Multiplicativity for D = D1 u D2 glued along D1(1, .) = D2(0, .).

    D1 and D2 have base corners D(0,0) and D1(1,0); the second factor is
    carried back to the common base along the bottom edge of D1.
    """
    for u in (0, 1, Fraction(1, 2)):
        if D1.at(1, u) != D2.at(0, u):
            raise HolonomyError("disks do not share the gluing edge")
    if D.base() != D1.base():
        raise HolonomyError("glued disk and first piece have different base points")
    a = disk_holonomy(Tf, D)
    a1, a2 = disk_holonomy(Tf, D1), disk_holonomy(Tf, D2)
    back = transport(Tf, D1.edge("bottom").reverse())
    moved = HolonomyElement(a2.lam, back(a2.unital), a2.order)
    star = StarProduct(Tf.tau0.subs(_point(D.base())), Tf.order)
    return _element_report(a, a1.mul(moved, star))


def rotate(D: DiskB) -> DiskB:
    """Same oriented disk with base corner moved to D(1, 0)."""
    return DiskB(tuple(c.subs({S: 1 - Poly.var(U), U: Poly.var(S)}) for c in D.components))


def naturality_check(Tf: TightFamily, D: DiskB) -> CheckReport:
    """a_{D, b2} = T_gamma a_{D, b1} for gamma the bottom edge b1 -> b2."""
    a1 = disk_holonomy(Tf, D)
    a2 = disk_holonomy(Tf, rotate(D))
    moved = HolonomyElement(a1.lam, transport(Tf, D.edge("bottom"))(a1.unital), a1.order)
    return _element_report(a2, moved)
