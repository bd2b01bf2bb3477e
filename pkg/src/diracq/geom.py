"""Multivector fields on M tensored with forms on B.

An element is stored as a superfunction in odd generators ``th_i`` (the
coordinate vector fields d/dx_i, i <= m) and ``db_j`` (j <= k), with each
basis monomial written in the normal order ``th_I db_J`` (I and J strictly
increasing).  The Schouten bracket is the odd Poisson bracket in which the
``th_i`` are conjugate to the ``x_i``; the ``db_j`` are spectators, which
fixes every Koszul sign at once.  The bracket is then twisted by
``(-1)^((p+1)(q+1))`` for multivector degrees p, q; the twist is symmetric
and compatible with graded Jacobi, and makes the symbol map to
polydifferential operators bracket-preserving (so [d1^d2, x1] = d2).
``d_B = sum_j db_j d/db_j`` acts from the left.

Total degree of a term is |I| + |J|; its degree in the shifted DGLA is one
less.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

from .exactalg import H, ExactAlgError, Poly, bvar, scalar, xvar

__all__ = [
    "GeomError",
    "MixedMultivector",
    "HamiltonianFamily",
    "wedge",
    "schouten",
    "d_B",
    "dgla_bracket",
    "mc_residual_L",
    "bivector_matrix",
]


class GeomError(ExactAlgError):
    pass


def _sort_sign(seq: tuple) -> tuple[int, tuple]:
    """Sign of the sorting permutation, 0 on repeats."""
    if len(set(seq)) != len(seq):
        return 0, ()
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return (-1 if inv % 2 else 1), tuple(sorted(seq))


@lru_cache(maxsize=None)
def _mul_basis(I: tuple, J: tuple, K: tuple, L: tuple) -> tuple[int, tuple, tuple]:
    s1, IK = _sort_sign(I + K)
    if not s1:
        return 0, (), ()
    s2, JL = _sort_sign(J + L)
    if not s2:
        return 0, (), ()
    s = s1 * s2 * (-1 if (len(J) * len(K)) % 2 else 1)
    return s, IK, JL


@lru_cache(maxsize=None)
def _dtheta(I: tuple, J: tuple, i: int, side: str) -> tuple[int, tuple]:
    if i not in I:
        return 0, I
    p = I.index(i)
    nodd = len(I) + len(J)
    moves = p if side == "left" else nodd - p - 1
    return (-1 if moves % 2 else 1), I[:p] + I[p + 1:]


def _add_into(out: dict, key, c):
    if key in out:
        v = out[key] + c
        if v.is_zero():
            del out[key]
        else:
            out[key] = v
    elif not c.is_zero():
        out[key] = c


@dataclass(frozen=True)
class MixedMultivector:
    m: int
    k: int
    terms: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (I, J), c in dict(self.terms).items():
            c = scalar(c)
            if c.is_zero():
                continue
            I, J = tuple(I), tuple(J)
            if any(not 1 <= i <= self.m for i in I) or any(not 1 <= j <= self.k for j in J):
                raise GeomError(f"index out of range in term {I}, {J} for m={self.m}, k={self.k}")
            sI, I2 = _sort_sign(I)
            sJ, J2 = _sort_sign(J)
            if not sI or not sJ:
                continue
            _add_into(clean, (I2, J2), c if sI * sJ == 1 else -c)
        object.__setattr__(self, "terms", clean)

    @classmethod
    def zero(cls, m: int, k: int) -> "MixedMultivector":
        return cls(m, k, {})

    @classmethod
    def function(cls, m: int, k: int, f) -> "MixedMultivector":
        return cls(m, k, {((), ()): f})

    def _like(self, terms) -> "MixedMultivector":
        mm = object.__new__(MixedMultivector)
        object.__setattr__(mm, "m", self.m)
        object.__setattr__(mm, "k", self.k)
        object.__setattr__(mm, "terms", terms)
        return mm

    def _check(self, other):
        if (self.m, self.k) != (other.m, other.k):
            raise GeomError(f"dimension mismatch: (m,k)=({self.m},{self.k}) vs ({other.m},{other.k})")

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, MixedMultivector):
            return NotImplemented
        return (self.m, self.k) == (other.m, other.k) and self.terms == other.terms

    def __hash__(self):
        return hash((self.m, self.k, frozenset(self.terms.items())))

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            _add_into(out, key, c)
        return self._like(out)

    def __neg__(self):
        return self._like({key: -c for key, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "MixedMultivector":
        c = scalar(c)
        out = {}
        for key, v in self.terms.items():
            _add_into(out, key, v * c)
        return self._like(out)

    def __rmul__(self, c):
        return self.scale(c)

    def __xor__(self, other):
        return wedge(self, other)

    def bidegrees(self) -> set[tuple[int, int]]:
        return {(len(I), len(J)) for I, J in self.terms}

    def component(self, p: int, q: int) -> "MixedMultivector":
        return self._like({(I, J): c for (I, J), c in self.terms.items() if len(I) == p and len(J) == q})

    def total_degree(self) -> int:
        degs = {p + q for p, q in self.bidegrees()}
        if len(degs) > 1:
            raise GeomError(f"inhomogeneous element with total degrees {sorted(degs)}")
        return degs.pop() if degs else 0

    def map_coeffs(self, fn) -> "MixedMultivector":
        out = {}
        for key, c in self.terms.items():
            _add_into(out, key, scalar(fn(c)))
        return self._like(out)

    def truncate(self, order: int | None) -> "MixedMultivector":
        if order is None:
            return self
        return self.map_coeffs(lambda c: c.truncate(order))

    def hcoeff(self, n: int) -> "MixedMultivector":
        return self.map_coeffs(lambda c: c.coeff(H, n))

    def subs(self, mapping) -> "MixedMultivector":
        return self.map_coeffs(lambda c: c.subs(mapping))

    def coeff(self, I: Iterable[int], J: Iterable[int] = ()):
        I, J = tuple(I), tuple(J)
        sI, I2 = _sort_sign(I)
        sJ, J2 = _sort_sign(J)
        c = self.terms.get((I2, J2), Poly())
        return c if sI * sJ == 1 else -c

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (len(kv[0][0]) + len(kv[0][1]), kv[0]))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (I, J), c in self.sorted_terms():
            basis = "^".join([f"d{i}" for i in I] + [f"db{j}" for j in J])
            parts.append(f"({c})" + (f"*{basis}" if basis else ""))
        return " + ".join(parts)

    __repr__ = __str__


def wedge(A: MixedMultivector, B: MixedMultivector) -> MixedMultivector:
    A._check(B)
    out: dict = {}
    for (I, J), a in A.terms.items():
        for (K, L), b in B.terms.items():
            s, IK, JL = _mul_basis(I, J, K, L)
            if s:
                c = a * b
                _add_into(out, (IK, JL), c if s == 1 else -c)
    return A._like(out)


def _twist(p: int, q: int) -> int:
    return -1 if (p + 1) * (q + 1) % 2 else 1


def schouten(A: MixedMultivector, B: MixedMultivector, order: int | None = None) -> MixedMultivector:
    """Twisted odd Poisson bracket: on terms of multivector degrees p, q,
    (-1)^((p+1)(q+1)) * sum_i (dr A/dth_i dB/dx_i - dA/dx_i dl B/dth_i)."""
    A._check(B)
    out: dict = {}
    m = A.m
    for i in range(1, m + 1):
        xi = xvar(i)
        for (I, J), a in A.terms.items():
            sa, Ia = _dtheta(I, J, i, "right")
            if sa:
                for (K, L), b in B.terms.items():
                    db = b.diff(xi)
                    if db.is_zero():
                        continue
                    s, IK, JL = _mul_basis(Ia, J, K, L)
                    if s:
                        s *= _twist(len(I), len(K))
                        c = a * db
                        _add_into(out, (IK, JL), c if s * sa == 1 else -c)
            da = a.diff(xi)
            if da.is_zero():
                continue
            for (K, L), b in B.terms.items():
                sb, Kb = _dtheta(K, L, i, "left")
                if not sb:
                    continue
                s, IK, JL = _mul_basis(I, J, Kb, L)
                if s:
                    s *= _twist(len(I), len(K))
                    c = da * b
                    _add_into(out, (IK, JL), -c if s * sb == 1 else c)
    res = A._like(out)
    return res.truncate(order) if order is not None else res


dgla_bracket = schouten


def d_B(A: MixedMultivector) -> MixedMultivector:
    out: dict = {}
    for (I, J), a in A.terms.items():
        for j in range(1, A.k + 1):
            if j in J:
                continue
            da = a.diff(bvar(j))
            if da.is_zero():
                continue
            # db_j th_I db_J = (-1)^|I| th_I db_j db_J
            s0, _ = _sort_sign((j,) + J)
            sign = s0 * (-1 if len(I) % 2 else 1)
            _add_into(out, (I, tuple(sorted((j,) + J))), da if sign == 1 else -da)
    return A._like(out)


def mc_residual_L(sigma: MixedMultivector, order: int | None = None) -> MixedMultivector:
    """d_B sigma + [sigma, sigma]/2, truncated mod h^(order+1) when given."""
    if sigma.terms and sigma.total_degree() != 2:
        raise GeomError("Maurer-Cartan element must have total degree 2 (DGLA degree 1)")
    res = d_B(sigma) + schouten(sigma, sigma).scale(Poly.const(1) / 2)
    return res.truncate(order)


def bivector_matrix(sigma: MixedMultivector) -> list[list]:
    """Antisymmetric matrix of a total-degree-2 element over the odd basis
    (th_1..th_m, db_1..db_k)."""
    n = sigma.m + sigma.k
    zero = Poly()
    S = [[zero] * n for _ in range(n)]
    for (I, J), c in sigma.terms.items():
        idx = [i - 1 for i in I] + [sigma.m + j - 1 for j in J]
        if len(idx) != 2:
            raise GeomError("expected a total-degree-2 element")
        a, b = idx
        S[a][b] = S[a][b] + c
        S[b][a] = S[b][a] - c
    return S


def from_bivector_matrix(m: int, k: int, S) -> MixedMultivector:
    terms = {}
    n = m + k
    for a in range(n):
        for b in range(a + 1, n):
            c = scalar(S[a][b])
            if c.is_zero():
                continue
            ia = ((a + 1,), ()) if a < m else ((), (a - m + 1,))
            ib = ((b + 1,), ()) if b < m else ((), (b - m + 1,))
            terms[(ia[0] + ib[0], ia[1] + ib[1])] = c
    return MixedMultivector(m, k, terms)


@dataclass(frozen=True)
class HamiltonianFamily:
    """Total-degree-2 element whose (2,0) and (1,1) parts are O(h).

    The Maurer-Cartan property is not assumed; see
    :func:`diracq.dirac.lemma2_degree_check` and :func:`mc_residual_L`.
    """

    sigma: MixedMultivector
    order: int

    def __post_init__(self):
        bad = self.sigma.bidegrees() - {(2, 0), (1, 1), (0, 2)}
        if bad:
            raise GeomError(f"Hamiltonian family has terms of bidegree {sorted(bad)}")
        for (I, J), c in self.sigma.terms.items():
            if len(I) and not _is_order_h(c):
                raise GeomError(f"term {I},{J} with coefficient {c} is not a multiple of h")

    @property
    def m(self):
        return self.sigma.m

    @property
    def k(self):
        return self.sigma.k

    @property
    def pi(self):
        return self.sigma.component(2, 0)

    @property
    def phi(self):
        return self.sigma.component(1, 1)

    @property
    def omega(self):
        return self.sigma.component(0, 2)

    def mc_residual(self) -> MixedMultivector:
        return mc_residual_L(self.sigma, self.order)


def _is_order_h(c) -> bool:
    o = c.order(H)
    return o is None or o >= 1
