"""Polydifferential operators on R^m, the Gerstenhaber bracket, HKR and
explicit star products (Moyal, second-order Kontsevich)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Mapping, Sequence

from .exactalg import H, ExactAlgError, Poly, scalar, xvar
from .geom import MixedMultivector, bivector_matrix, schouten

__all__ = [
    "StarError",
    "PolyDiffOp",
    "StarProduct",
    "apply",
    "compose_at",
    "gerstenhaber",
    "hochschild_d",
    "product_op",
    "identity_op",
    "hkr",
    "moyal",
    "kontsevich2",
    "assoc_residual",
    "poisson_matrix",
]


class StarError(ExactAlgError):
    pass


def _addmi(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def _add_into(out: dict, key, c):
    if key in out:
        v = out[key] + c
        if v.is_zero():
            del out[key]
        else:
            out[key] = v
    elif not c.is_zero():
        out[key] = c


class PolyDiffOp:
    """``sum coeff * d^a1 f1 * ... * d^an fn`` over x1..xm.

    ``terms`` maps a tuple of n multi-indices (each of length m) to a
    coefficient polynomial, which may involve b-variables, path parameters
    and h.  Arity 0 embeds functions (key ``()``).
    """

    __slots__ = ("m", "arity", "terms")

    def __init__(self, m: int, arity: int, terms: Mapping | None = None):
        self.m = m
        self.arity = arity
        clean: dict = {}
        for slots, c in (terms or {}).items():
            slots = tuple(tuple(a) for a in slots)
            if len(slots) != arity or any(len(a) != m or min(a, default=0) < 0 for a in slots):
                raise StarError(f"bad multi-index {slots} for arity {arity}, m={m}")
            _add_into(clean, slots, scalar(c))
        self.terms = clean

    @classmethod
    def _raw(cls, m, arity, terms):
        op = object.__new__(cls)
        op.m, op.arity, op.terms = m, arity, terms
        return op

    @classmethod
    def function(cls, m: int, f) -> "PolyDiffOp":
        return cls(m, 0, {(): scalar(f)})

    @classmethod
    def zero(cls, m: int, arity: int) -> "PolyDiffOp":
        return cls._raw(m, arity, {})

    def is_zero(self) -> bool:
        return not self.terms

    def _check(self, other):
        if not isinstance(other, PolyDiffOp):
            raise TypeError("expected a PolyDiffOp")
        if self.m != other.m or self.arity != other.arity:
            raise StarError(f"incompatible operators (m={self.m}, arity={self.arity}) and "
                            f"(m={other.m}, arity={other.arity})")

    def __eq__(self, other):
        if not isinstance(other, PolyDiffOp):
            return NotImplemented
        return (self.m, self.arity) == (other.m, other.arity) and self.terms == other.terms

    def __hash__(self):
        return hash((self.m, self.arity, frozenset(self.terms.items())))

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            _add_into(out, key, c)
        return PolyDiffOp._raw(self.m, self.arity, out)

    def __neg__(self):
        return PolyDiffOp._raw(self.m, self.arity, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "PolyDiffOp":
        c = scalar(c)
        out: dict = {}
        for key, v in self.terms.items():
            _add_into(out, key, v * c)
        return PolyDiffOp._raw(self.m, self.arity, out)

    def map_coeffs(self, fn) -> "PolyDiffOp":
        out: dict = {}
        for key, v in self.terms.items():
            _add_into(out, key, scalar(fn(v)))
        return PolyDiffOp._raw(self.m, self.arity, out)

    def truncate(self, order: int | None) -> "PolyDiffOp":
        if order is None:
            return self
        return self.map_coeffs(lambda c: c.truncate(order))

    def hcoeff(self, n: int) -> "PolyDiffOp":
        return self.map_coeffs(lambda c: c.coeff(H, n))

    def subs(self, mapping) -> "PolyDiffOp":
        return self.map_coeffs(lambda c: c.subs(mapping))

    def diff_coeffs(self, v: int) -> "PolyDiffOp":
        return self.map_coeffs(lambda c: c.diff(v))

    def max_order(self) -> int:
        return max((sum(sum(a) for a in k) for k in self.terms), default=0)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (sum(map(sum, kv[0])), kv[0]))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for slots, c in self.sorted_terms():
            ds = []
            for a in slots:
                d = "".join(f"d{i + 1}" * e if e <= 2 else f"d{i + 1}^{e}" for i, e in enumerate(a))
                ds.append(d or "1")
            parts.append(f"({c})" + ("" if not slots else "*" + "(x)".join(ds)))
        return " + ".join(parts)

    __repr__ = __str__

    def __call__(self, *args):
        return apply(self, args)


def identity_op(m: int) -> PolyDiffOp:
    return PolyDiffOp._raw(m, 1, {((0,) * m,): Poly.const(1)})


def product_op(m: int) -> PolyDiffOp:
    z = (0,) * m
    return PolyDiffOp._raw(m, 2, {(z, z): Poly.const(1)})


def _unit(m: int, i: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(m))


def derivative(f, alpha: Sequence[int]):
    out = scalar(f)
    for i, e in enumerate(alpha):
        if e:
            out = out.diff(xvar(i + 1), e)
    return out


def apply(P: PolyDiffOp, args: Sequence, order: int | None = None):
    if len(args) != P.arity:
        raise StarError(f"operator of arity {P.arity} applied to {len(args)} arguments")
    args = [scalar(a) for a in args]
    cache: list[dict] = [dict() for _ in args]
    total = Poly()
    for slots, c in P.terms.items():
        val = c
        for i, a in enumerate(slots):
            d = cache[i].get(a)
            if d is None:
                d = derivative(args[i], a)
                cache[i][a] = d
            if d.is_zero():
                val = None
                break
            val = val * d
            if order is not None:
                val = val.truncate(order)
        if val is not None:
            total = total + val
    return total.truncate(order) if order is not None else total


@lru_cache(maxsize=None)
def _splits(alpha: tuple, parts: int) -> tuple:
    """All ways to write alpha = g_0 + ... + g_{parts-1} with multinomial weights."""
    per_var = []
    for e in alpha:
        opts = []
        for comp in _compositions(e, parts):
            w = factorial(e)
            for c in comp:
                w //= factorial(c)
            opts.append((w, comp))
        per_var.append(opts)
    out = []
    for choice in itertools.product(*per_var):
        w = 1
        for cw, _ in choice:
            w *= cw
        gs = tuple(tuple(comp[l] for _, comp in choice) for l in range(parts))
        out.append((w, gs))
    return tuple(out)


@lru_cache(maxsize=None)
def _compositions(n: int, parts: int) -> tuple:
    if parts == 1:
        return ((n,),)
    out = []
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


def compose_at(P: PolyDiffOp, i: int, Q: PolyDiffOp, order: int | None = None) -> PolyDiffOp:
    """Insert Q into slot i (0-based) of P, expanding by Leibniz."""
    if P.m != Q.m:
        raise StarError("operators on different spaces")
    if not 0 <= i < P.arity:
        raise StarError(f"slot {i} out of range for arity {P.arity}")
    b = Q.arity
    out: dict = {}
    dcache: dict = {}
    for Aslots, p in P.terms.items():
        alpha = Aslots[i]
        head, tail = Aslots[:i], Aslots[i + 1:]
        for Bslots, q in Q.terms.items():
            for w, gs in _splits(alpha, b + 1):
                key = (id(q), gs[0])
                dq = dcache.get(key)
                if dq is None:
                    dq = derivative(q, gs[0])
                    dcache[key] = dq
                if dq.is_zero():
                    continue
                c = p * dq
                if w != 1:
                    c = c.scale(w)
                if order is not None:
                    c = c.truncate(order)
                slots = head + tuple(_addmi(Bslots[l], gs[l + 1]) for l in range(b)) + tail
                _add_into(out, slots, c)
    return PolyDiffOp._raw(P.m, P.arity + b - 1, out)


def _circ(P: PolyDiffOp, Q: PolyDiffOp, order) -> PolyDiffOp:
    out = PolyDiffOp.zero(P.m, P.arity + Q.arity - 1)
    for i in range(P.arity):
        term = compose_at(P, i, Q, order)
        out = out - term if (i * (Q.arity - 1)) % 2 else out + term
    return out


def gerstenhaber(P: PolyDiffOp, Q: PolyDiffOp, order: int | None = None) -> PolyDiffOp:
    """[P, Q] = P o Q - (-1)^((p-1)(q-1)) Q o P with arities p, q."""
    a = _circ(P, Q, order)
    b = _circ(Q, P, order)
    if ((P.arity - 1) * (Q.arity - 1)) % 2:
        return a + b
    return a - b


def hochschild_d(P: PolyDiffOp, order: int | None = None) -> PolyDiffOp:
    """[m, P]; equals (-1)^(p+1) times the usual coboundary for arity p."""
    return gerstenhaber(product_op(P.m), P, order)


def hkr(A: MixedMultivector) -> PolyDiffOp:
    """Antisymmetrization u_1^...^u_p -> (1/p!) sum sign(s) u_s(1) (x) ... (x) u_s(p)."""
    if any(J for _, J in A.terms):
        raise StarError("hkr expects a pure multivector (no db legs)")
    degs = {len(I) for I, _ in A.terms}
    if len(degs) > 1:
        raise StarError("hkr expects a homogeneous multivector")
    p = degs.pop() if degs else 0
    m = A.m
    out: dict = {}
    for I, _ in A.terms:
        c = A.terms[(I, _)]
        for perm in itertools.permutations(range(p)):
            inv = sum(1 for a in range(p) for b in range(a + 1, p) if perm[a] > perm[b])
            slots = tuple(_unit(m, I[perm[j]] - 1) for j in range(p))
            v = c.scale(Fraction(-1 if inv % 2 else 1, factorial(p)))
            _add_into(out, slots, v)
    return PolyDiffOp._raw(m, p, out)


def poisson_matrix(pi: MixedMultivector) -> list[list]:
    """Full antisymmetric coefficient matrix pi^{ij} of a bivector."""
    if pi.k and any(J for _, J in pi.terms):
        raise StarError("expected a bivector without db legs")
    S = bivector_matrix(pi) if pi.terms else None
    m = pi.m
    if S is None:
        return [[Poly()] * m for _ in range(m)]
    return [row[:m] for row in S[:m]]


def _is_o_h(c) -> bool:
    o = c.order(H)
    return o is None or o >= 1


def _first_order(P, m):
    out: dict = {}
    for i in range(m):
        for j in range(m):
            if not P[i][j].is_zero():
                _add_into(out, (_unit(m, i), _unit(m, j)), P[i][j].scale(Fraction(1, 2)))
    return PolyDiffOp._raw(m, 2, out)


def symbol_mul(P: PolyDiffOp, Q: PolyDiffOp, order: int | None = None) -> PolyDiffOp:
    """Product of symbols; composition when all coefficients are x-constant."""
    out: dict = {}
    for a, p in P.terms.items():
        for b, q in Q.terms.items():
            c = p * q
            if order is not None:
                c = c.truncate(order)
            _add_into(out, tuple(_addmi(x, y) for x, y in zip(a, b)), c)
    return PolyDiffOp._raw(P.m, P.arity, out)


@dataclass(frozen=True)
class StarProduct:
    """f * g = fg + correction(f, g) modulo h^(order+1)."""

    correction: PolyDiffOp
    order: int

    def __post_init__(self):
        if self.correction.arity != 2:
            raise StarError("star-product correction must be bidifferential")
        for slots, c in self.correction.terms.items():
            if any(sum(a) == 0 for a in slots):
                raise StarError(f"non-unital correction term {slots}")
            if not _is_o_h(c):
                raise StarError(f"correction coefficient {c} is not O(h)")
        object.__setattr__(self, "correction", self.correction.truncate(self.order))

    @property
    def m(self) -> int:
        return self.correction.m

    def full_op(self) -> PolyDiffOp:
        return product_op(self.m) + self.correction

    def star(self, f, g):
        f, g = scalar(f), scalar(g)
        return ((f * g).truncate(self.order) + apply(self.correction, (f, g), self.order))

    def __call__(self, f, g):
        return self.star(f, g)

    def commutator(self, f, g):
        return self.star(f, g) - self.star(g, f)

    def ad(self, g) -> PolyDiffOp:
        """Inner derivation f -> g*f - f*g as a 1-ary operator."""
        G = PolyDiffOp.function(self.m, g)
        P = self.correction
        return (compose_at(P, 0, G, self.order) - compose_at(P, 1, G, self.order)).truncate(self.order)

    def inverse(self, u):
        """Star inverse of u = c + O(h) with c a nonzero constant."""
        u = scalar(u).truncate(self.order)
        c0 = u.coeff(H, 0)
        if not c0.is_const() or c0.is_zero():
            raise StarError("non-unital element: leading coefficient is not a nonzero constant")
        inv0 = 1 / c0.const_value()
        v = (u.scale(inv0) - 1)  # u/c0 = 1 + v with v = O(h)
        out = Poly.const(1)
        term = Poly.const(1)
        for _ in range(self.order):
            term = -self.star(term, v)
            out = out + term
        return out.scale(inv0).truncate(self.order)

    def subs(self, mapping) -> "StarProduct":
        return StarProduct(self.correction.subs(mapping), self.order)


def _check_bivector(pi: MixedMultivector):
    if pi.terms and (pi.bidegrees() != {(2, 0)}):
        raise StarError("expected a pure bivector (bidegree (2,0))")
    for c in pi.terms.values():
        if not _is_o_h(c):
            raise StarError(f"bivector coefficient {c} is not O(h)")


def moyal(pi: MixedMultivector, order: int) -> StarProduct:
    """Exponential product for an x-independent bivector."""
    _check_bivector(pi)
    xs = [xvar(i) for i in range(1, pi.m + 1)]
    if any(c.depends_on(xs) for c in pi.terms.values()):
        raise StarError("moyal requires x-independent coefficients")
    m = pi.m
    B1 = _first_order(poisson_matrix(pi), m)
    total = PolyDiffOp.zero(m, 2)
    power = None
    for n in range(1, order + 1):
        power = B1 if power is None else symbol_mul(power, B1, order)
        if power.is_zero():
            break
        total = total + power.scale(Fraction(1, factorial(n)))
    return StarProduct(total.truncate(order), order)


def kontsevich2(pi: MixedMultivector, order: int, check: bool = True) -> StarProduct:
    """Graph terms up to second order:

    fg + 1/2 p^ij d_i f d_j g + 1/8 p^ij p^kl d_ik f d_jl g
       + 1/12 p^ij d_j p^kl (d_ik f d_l g - d_k f d_il g)
    """
    _check_bivector(pi)
    if check:
        res = schouten(pi, pi, order)
        if not res.is_zero():
            raise StarError(f"non-Poisson input: [pi, pi] = {res}")
    m = pi.m
    P = poisson_matrix(pi)
    out: dict = {}
    B1 = _first_order(P, m)
    for key, c in B1.terms.items():
        _add_into(out, key, c)
    for i, j, k, l in itertools.product(range(m), repeat=4):
        if P[i][j].is_zero() or P[k][l].is_zero():
            continue
        c = (P[i][j] * P[k][l]).truncate(order)
        if not c.is_zero():
            key = (_addmi(_unit(m, i), _unit(m, k)), _addmi(_unit(m, j), _unit(m, l)))
            _add_into(out, key, c.scale(Fraction(1, 8)))
    for i, j, k, l in itertools.product(range(m), repeat=4):
        if P[i][j].is_zero():
            continue
        dP = P[k][l].diff(xvar(j + 1))
        if dP.is_zero():
            continue
        c = (P[i][j] * dP).truncate(order).scale(Fraction(1, 12))
        if c.is_zero():
            continue
        _add_into(out, (_addmi(_unit(m, i), _unit(m, k)), _unit(m, l)), c)
        _add_into(out, (_unit(m, k), _addmi(_unit(m, i), _unit(m, l))), -c)
    return StarProduct(PolyDiffOp._raw(m, 2, out).truncate(order), order)


@dataclass(frozen=True)
class AssocReport:
    pointwise: tuple
    operator: PolyDiffOp

    @property
    def ok(self) -> bool:
        return all(r.is_zero() for _, r in self.pointwise) and self.operator.is_zero()


def assoc_residual(S: StarProduct, triples: Sequence = (), operator: bool = True) -> AssocReport:
    """(f*g)*h - f*(g*h) on each triple and 1/2 [m + tau0, m + tau0]."""
    rows = []
    for f, g, h in triples:
        r = S.star(S.star(f, g), h) - S.star(f, S.star(g, h))
        rows.append(((f, g, h), r))
    if operator:
        mu = S.full_op()
        op = gerstenhaber(mu, mu, S.order).scale(Fraction(1, 2)).truncate(S.order)
    else:
        op = PolyDiffOp.zero(S.m, 3)
    return AssocReport(tuple(rows), op)
