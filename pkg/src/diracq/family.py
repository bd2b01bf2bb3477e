"""Tight families of star products over a parameter space B = R^k.

A family is an element ``m + tau`` of the polydifferential DGLA tensored
with forms on B.  Form-valued operators are stored as ``{J: op}`` meaning
``sum_J db_J (x) op_J`` with the form on the left; with ``|A| = arity - 1``

    [db_I (x) A, db_J (x) B] = (-1)^(|A||J|) db_I^db_J (x) [A, B]
    d(db_J (x) A)            = sum_j db_j^db_J (x) dA/db_j

This is a DGLA, and the form-degree components of ``d tau + [m+tau, m+tau]/2``
are the four tight-family equations.  ``tau1`` is ``sum_j db_j (x) tau1[j]``,
so transport along a path solves ``F' = -tau1(gamma') F``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .exactalg import H, ExactAlgError, Poly, bvar, scalar, solve_sparse, xvar
from .geom import HamiltonianFamily, MixedMultivector, mc_residual_L
from .star import PolyDiffOp, StarProduct, gerstenhaber, hkr, kontsevich2, moyal, product_op

__all__ = [
    "FamilyError",
    "ObstructionError",
    "TightFamily",
    "MC4Report",
    "PHI_SIGN",
    "form_bracket",
    "form_d",
    "mc4_check",
    "quantize_family",
    "gauge_family",
]

# tau1 seed = PHI_SIGN * hkr(sigma^{1,1}): the Koszul sign of reading th_i db_j
# as db_j (x) d_i; calibrated against the
# tight-family equations (tests/test_family.py::test_phi_sign_calibration)
PHI_SIGN = -1


class FamilyError(ExactAlgError):
    pass


class ObstructionError(FamilyError):
    def __init__(self, message, order=None, residual=None):
        super().__init__(message)
        self.order = order
        self.residual = residual


# form-valued operators

def _form_sign(I: tuple, J: tuple):
    seq = I + J
    if len(set(seq)) != len(seq):
        return 0, ()
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return (-1 if inv % 2 else 1), tuple(sorted(seq))


def _fadd(out: dict, J, op):
    if op.is_zero():
        return
    if J in out:
        s = out[J] + op
        if s.is_zero():
            del out[J]
        else:
            out[J] = s
    else:
        out[J] = op


def form_add(X: Mapping, Y: Mapping) -> dict:
    out = dict(X)
    for J, op in Y.items():
        _fadd(out, J, op)
    return out


def form_scale(X: Mapping, c) -> dict:
    out: dict = {}
    for J, op in X.items():
        _fadd(out, J, op.scale(c))
    return out


def form_bracket(X: Mapping, Y: Mapping, order: int | None = None) -> dict:
    out: dict = {}
    for I, A in X.items():
        for J, B in Y.items():
            s, IJ = _form_sign(I, J)
            if not s:
                continue
            if (A.arity - 1) * len(J) % 2:
                s = -s
            br = gerstenhaber(A, B, order)
            _fadd(out, IJ, br if s == 1 else -br)
    return out


def form_d(X: Mapping, k: int) -> dict:
    out: dict = {}
    for J, A in X.items():
        for j in range(1, k + 1):
            s, jJ = _form_sign((j,), J)
            if not s:
                continue
            dA = A.diff_coeffs(bvar(j))
            _fadd(out, jJ, dA if s == 1 else -dA)
    return out


def form_map(X: Mapping, fn) -> dict:
    out: dict = {}
    for J, A in X.items():
        _fadd(out, J, fn(A))
    return out


def form_is_zero(X: Mapping) -> bool:
    return all(op.is_zero() for op in X.values())


def form_str(X: Mapping) -> str:
    if form_is_zero(X):
        return "0"
    parts = []
    for J in sorted(X):
        basis = "^".join(f"db{j}" for j in J)
        parts.append(f"[{basis or '1'}] {X[J]}")
    return "; ".join(parts)


# tight families

@dataclass(frozen=True)
class TightFamily:
    m: int
    k: int
    order: int
    tau0: PolyDiffOp
    tau1: tuple
    tau2: Mapping = field(default_factory=dict)
    verified: bool = False

    def __post_init__(self):
        if self.tau0.arity != 2 or self.tau0.m != self.m:
            raise FamilyError("tau0 must be a bidifferential operator on R^m")
        tau1 = tuple(self.tau1)
        if len(tau1) != self.k or any(A.arity != 1 or A.m != self.m for A in tau1):
            raise FamilyError(f"tau1 must list {self.k} differential operators")
        tau2 = {}
        for (i, j), f in dict(self.tau2).items():
            f = scalar(f)
            if not (1 <= i <= self.k and 1 <= j <= self.k) or i == j:
                raise FamilyError(f"bad tau2 index ({i}, {j})")
            if i > j:
                i, j, f = j, i, -f
            tau2[(i, j)] = tau2.get((i, j), Poly()) + f
        tau2 = {key: f for key, f in tau2.items() if not f.is_zero()}
        # validates unitality and tau0 = O(h)
        StarProduct(self.tau0, self.order)
        for A in tau1:
            for c in A.terms.values():
                o = c.order(H)
                if o is not None and o < 1:
                    raise FamilyError(f"tau1 coefficient {c} is not O(h)")
        object.__setattr__(self, "tau0", self.tau0.truncate(self.order))
        object.__setattr__(self, "tau1", tuple(A.truncate(self.order) for A in tau1))
        object.__setattr__(self, "tau2", {key: f.truncate(self.order) for key, f in sorted(tau2.items())})

    def star_product(self) -> StarProduct:
        return StarProduct(self.tau0, self.order)

    def at(self, point: Mapping) -> StarProduct:
        """The star product of the fiber over a point of B (b_j -> value)."""
        mapping = {bvar(j): Poly.const(v) for j, v in point.items()}
        return StarProduct(self.tau0.subs(mapping), self.order)

    def as_form(self, with_m: bool = False) -> dict:
        out: dict = {}
        _fadd(out, (), self.tau0 + product_op(self.m) if with_m else self.tau0)
        for j, A in enumerate(self.tau1, start=1):
            _fadd(out, (j,), A)
        for (i, j), f in self.tau2.items():
            _fadd(out, (i, j), PolyDiffOp.function(self.m, f))
        return out

    def with_(self, **kw) -> "TightFamily":
        data = dict(m=self.m, k=self.k, order=self.order, tau0=self.tau0, tau1=self.tau1,
                    tau2=self.tau2, verified=False)
        data.update(kw)
        return TightFamily(**data)

    def subs_params(self, mapping) -> "TightFamily":
        return self.with_(tau0=self.tau0.subs(mapping), tau1=tuple(A.subs(mapping) for A in self.tau1),
                          tau2={key: f.subs(mapping) for key, f in self.tau2.items()})


@dataclass(frozen=True)
class MC4Report:
    residuals: tuple  # four dicts {J: op}, by form degree 0..3

    @property
    def ok(self) -> bool:
        return all(form_is_zero(r) for r in self.residuals)

    def __bool__(self):
        return self.ok

    def failing(self) -> list[int]:
        return [i + 1 for i, r in enumerate(self.residuals) if not form_is_zero(r)]

    def describe(self) -> list[str]:
        return [f"E{i + 1}: {form_str(r)}" for i, r in enumerate(self.residuals)]


def _split_by_degree(X: Mapping) -> tuple:
    parts = [dict() for _ in range(4)]
    for J, op in X.items():
        if len(J) > 3:
            raise FamilyError("form degree above 3 in a Maurer-Cartan residual")
        parts[len(J)][J] = op
    return tuple(parts)


def mc_residual(T: TightFamily) -> dict:
    mu = T.as_form(with_m=True)
    half = form_scale(form_bracket(mu, mu, T.order), Fraction(1, 2))
    res = form_add(form_d(T.as_form(), T.k), half)
    return form_map(res, lambda A: A.truncate(T.order))


def mc4_check(T: TightFamily) -> MC4Report:
    """Residuals of the tight-family equations modulo h^(order+1):

    E1 = [mu, mu]/2,  E2 = d tau0 + [mu, tau1],
    E3 = d tau1 + [tau1, tau1]/2 + [mu, tau2],  E4 = d tau2 + [tau1, tau2]
    with mu = m + tau0, as components of one DGLA residual.
    """
    return MC4Report(_split_by_degree(mc_residual(T)))


def verify(T: TightFamily) -> TightFamily:
    rep = mc4_check(T)
    if not rep.ok:
        raise FamilyError("tight-family equations fail: " + "; ".join(
            d for d, i in zip(rep.describe(), range(4)) if i + 1 in rep.failing()))
    return T.with_(verified=True)


# builders

def gauge_family(S: StarProduct, generators: Sequence, k: int | None = None,
                 tau2: Mapping | None = None) -> TightFamily:
    """Family with b-independent star product S and tau1_j = generators[j].

    A generator is either a 1-ary operator (which must be a derivation of S)
    or a function g, standing for the inner derivation f -> g*f - f*g.  If
    every generator is inner, tau2 is solved from the curvature equation
    (constant terms dropped); otherwise it must be supplied.
    """
    k = len(generators) if k is None else k
    if len(generators) != k:
        raise FamilyError(f"expected {k} generators")
    H_ = S.order
    m = S.m
    gens, potentials = [], []
    for g in generators:
        if isinstance(g, PolyDiffOp):
            gens.append(g.truncate(H_))
            potentials.append(None)
        else:
            g = scalar(g)
            gens.append(S.ad(g))
            potentials.append(g.truncate(H_))
    mu = S.full_op()
    for j, A in enumerate(gens, start=1):
        r = gerstenhaber(mu, A, H_)
        if not r.is_zero():
            raise FamilyError(f"generator {j} is not a derivation of the star product: residual {r}")
    if tau2 is None:
        if any(p is None for p in potentials):
            if k >= 2:
                raise FamilyError("tau2 must be supplied when generators are not inner")
            tau2 = {}
        else:
            tau2 = {}
            for i, j in itertools.combinations(range(1, k + 1), 2):
                gi, gj = potentials[i - 1], potentials[j - 1]
                curv = gj.diff(bvar(i)) - gi.diff(bvar(j)) + S.commutator(gi, gj)
                tau2[(i, j)] = -_drop_constant(curv, m, k)
    T = TightFamily(m, k, H_, S.correction, tuple(gens), tau2)
    return verify(T)


def _drop_constant(p: Poly, m: int, k: int) -> Poly:
    space = [xvar(i) for i in range(1, m + 1)] + [bvar(j) for j in range(1, k + 1)]
    return Poly._raw({mono: c for mono, c in p.terms.items()
                      if any(v in space for v, _ in mono)})


# quantizer

@dataclass(frozen=True)
class Bounds:
    degree: int
    order: int


def default_bounds(sigma: MixedMultivector, order: int) -> Bounds:
    space = [xvar(i) for i in range(1, sigma.m + 1)] + [bvar(j) for j in range(1, sigma.k + 1)]
    deg = max((c.degree(space) for c in sigma.terms.values()), default=0)
    return Bounds(deg + 2 * order, 2 * order)


def _monomials(vars_: list[int], maxdeg: int):
    out = [()]
    for d in range(1, maxdeg + 1):
        for combo in itertools.combinations_with_replacement(vars_, d):
            mono: dict = {}
            for v in combo:
                mono[v] = mono.get(v, 0) + 1
            out.append(tuple(sorted(mono.items())))
    return out


def _multi_indices(m: int, lo: int, hi: int):
    out = []
    for total in range(lo, hi + 1):
        for combo in itertools.combinations_with_replacement(range(m), total):
            a = [0] * m
            for i in combo:
                a[i] += 1
            out.append(tuple(a))
    return sorted(out, key=lambda a: (sum(a), tuple(-e for e in a)))


def _flatten(X: Mapping, n: int) -> dict:
    vec: dict = {}
    for J, A in X.items():
        for slots, c in A.terms.items():
            for mono, v in c.coeff(H, n).terms.items():
                vec[(J, slots, mono)] = v
    return vec


def _candidates(m: int, k: int, n: int, deg: int, rord: int, allow_tau0: bool):
    """Correction candidates h^n * mono * op, in canonical order."""
    space = [xvar(i) for i in range(1, m + 1)] + [bvar(j) for j in range(1, k + 1)]
    monos = sorted(_monomials(space, deg), key=lambda mo: (sum(e for _, e in mo), mo))
    hn = ((H, n),) if n else ()
    cands = []
    pairs = list(itertools.combinations(range(1, k + 1), 2))
    for mono in monos:
        c = Poly.monomial(tuple(sorted(hn + mono)))
        for J in pairs:
            cands.append((J, PolyDiffOp._raw(m, 0, {(): c})))
    for a in _multi_indices(m, 1, rord):
        for mono in monos:
            c = Poly.monomial(tuple(sorted(hn + mono)))
            for j in range(1, k + 1):
                cands.append(((j,), PolyDiffOp._raw(m, 1, {(a,): c})))
    if allow_tau0:
        idx = _multi_indices(m, 1, rord)
        for a in idx:
            for b in idx:
                if sum(a) + sum(b) > rord:
                    continue
                for mono in monos:
                    c = Poly.monomial(tuple(sorted(hn + mono)))
                    cands.append(((), PolyDiffOp._raw(m, 2, {(a, b): c})))
    return cands


def _apply_correction(T: TightFamily, X: Mapping) -> TightFamily:
    tau0 = T.tau0
    tau1 = list(T.tau1)
    tau2 = dict(T.tau2)
    for J, A in X.items():
        if len(J) == 0:
            tau0 = tau0 + A
        elif len(J) == 1:
            tau1[J[0] - 1] = tau1[J[0] - 1] + A
        else:
            tau2[J] = tau2.get(J, Poly()) + A.terms.get((), Poly())
    return T.with_(tau0=tau0, tau1=tuple(tau1), tau2=tau2)


def _seed(sigma: MixedMultivector, order: int) -> TightFamily:
    m, k = sigma.m, sigma.k
    pi = MixedMultivector(m, 0, {(I, J): c for (I, J), c in sigma.terms.items() if len(I) == 2})
    xs = [xvar(i) for i in range(1, m + 1)]
    if any(c.depends_on(xs) for c in pi.terms.values()):
        tau0 = kontsevich2(pi, order, check=False).correction
    else:
        tau0 = moyal(pi, order).correction
    tau1 = []
    for j in range(1, k + 1):
        vf = MixedMultivector(m, 0, {(I, ()): c for (I, J), c in sigma.terms.items()
                                     if len(I) == 1 and J == (j,)})
        A = hkr(vf) if vf.terms else PolyDiffOp.zero(m, 1)
        tau1.append(A.scale(PHI_SIGN))
    tau2 = {J: c for (I, J), c in sigma.terms.items() if not I}
    return TightFamily(m, k, order, tau0, tuple(tau1), tau2)


def quantize_family(sigma, order: int, degree_bound: int | None = None,
                    order_bound: int | None = None) -> TightFamily:
    """Seed (second-order graph product, hkr of the mixed part, the 2-form)
    followed by an exact order-by-order corrector within the bounds."""
    if isinstance(sigma, HamiltonianFamily):
        sigma = sigma.sigma
    HamiltonianFamily(sigma, order)
    res = mc_residual_L(sigma, order)
    if not res.is_zero():
        raise FamilyError(f"input is not a Maurer-Cartan element: residual {res}")
    if any(not isinstance(c, Poly) for c in sigma.terms.values()):
        # rational coefficients: only the seed is available, no corrector
        T = _seed(sigma, order)
        rep = mc4_check(T)
        if not rep.ok:
            orders = [c.order(H) for r in rep.residuals for op in r.values() for c in op.terms.values()]
            n = min((o for o in orders if o is not None), default=0)
            raise ObstructionError("rational-coefficient seed is not a tight family and the corrector "
                                   "only handles polynomial coefficients", n, form_add(*rep.residuals[:2]))
        return verify(T)
    bounds = default_bounds(sigma, order)
    deg = bounds.degree if degree_bound is None else degree_bound
    rord = bounds.order if order_bound is None else order_bound
    m, k = sigma.m, sigma.k
    T = _seed(sigma, order)
    xs = [xvar(i) for i in range(1, m + 1)]
    pi_const = not any(c.depends_on(xs) for (I, _), c in sigma.terms.items() if len(I) == 2)
    base = form_add({(): product_op(m)}, {J: PolyDiffOp.function(m, f.coeff(H, 0))
                                          for J, f in T.tau2.items()})

    def D0(X):
        return form_add(form_d(X, k), form_bracket(base, X))

    for n in range(1, order + 1):
        R = form_map(mc_residual(T), lambda A: A.hcoeff(n))
        if form_is_zero(R):
            continue
        if not form_is_zero(D0(R)):
            raise FamilyError(f"closedness check failed at order h^{n}")
        # tau0 stays the graph product at orders <= 2 (or everywhere when pi is constant)
        allow_tau0 = n > 2 and not pi_const
        target = _flatten(form_scale(R, -1), 0)
        X = _solve(m, k, n, deg, rord, allow_tau0, D0, target)
        if X is None and not allow_tau0 and n > 2:
            X = _solve(m, k, n, deg, rord, True, D0, target)
        if X is None:
            raise ObstructionError(
                f"obstruction not resolvable within bounds (D,R)=({deg},{rord}) at order h^{n}: "
                f"residual {form_str(R)}", n, R)
        T = _apply_correction(T, X)
    return verify(T)


def _solve(m, k, n, deg, rord, allow_tau0, D0, target):
    # grow the candidate space so the selected correction has minimal support
    cache: dict = {}
    for r in range(1, rord + 1):
        for d in range(0, deg + 1):
            cands = _candidates(m, k, n, d, r, allow_tau0)
            cols = []
            for J, op in cands:
                key = (J, frozenset(op.terms.items()))
                if key not in cache:
                    hop = op.map_coeffs(lambda c: c.coeff(H, n))
                    cache[key] = _flatten(D0({J: hop}), 0)
                cols.append(cache[key])
            sol = solve_sparse(cols, target)
            if sol is not None:
                X: dict = {}
                for (J, op), v in zip(cands, sol):
                    if v:
                        _fadd(X, J, op.scale(v))
                return X
    return None
