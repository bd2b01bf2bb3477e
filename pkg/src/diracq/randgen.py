"""Seeded generators for random polynomial data used by the property suites.

Every generator takes an explicit ``random.Random`` so that a single seed
reproduces a whole run.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations

from .dirac import GenSection, chart_coords
from .exactalg import H, Poly
from .geom import MixedMultivector

__all__ = ["rng", "rand_coeff", "rand_poly", "rand_section", "rand_multivector", "rand_sigma"]


def rng(seed: int) -> random.Random:
    return random.Random(seed)


def rand_coeff(r: random.Random, span: int = 3) -> Fraction:
    num = r.choice([i for i in range(-span, span + 1) if i])
    den = r.choice((1, 1, 2, 3))
    return Fraction(num, den)


def rand_poly(r: random.Random, variables, degree: int = 2, terms: int = 3, hbar: int = 0) -> Poly:
    """Random polynomial in ``variables`` of total degree <= degree; with hbar > 0
    each term also carries a power h^1..h^hbar."""
    variables = list(variables)
    out = Poly()
    for _ in range(r.randint(1, terms)):
        mono = Poly.const(rand_coeff(r))
        for _ in range(r.randint(0, degree)):
            if variables:
                mono = mono * Poly.var(r.choice(variables))
        if hbar:
            mono = mono * Poly.var(H, r.randint(1, hbar))
        out = out + mono
    return out


def rand_section(r: random.Random, m: int, k: int, degree: int = 2, terms: int = 2) -> GenSection:
    coords = chart_coords(m, k)
    n = len(coords)
    vec = [rand_poly(r, coords, degree, terms) for _ in range(n)]
    cov = [rand_poly(r, coords, degree, terms) for _ in range(n)]
    return GenSection(coords, tuple(vec), tuple(cov))


def rand_multivector(r: random.Random, m: int, k: int, p: int, q: int, degree: int = 2,
                     terms: int = 2, hbar: int = 0) -> MixedMultivector:
    """Random element of bidegree (p, q): p theta's and q db's."""
    coords = chart_coords(m, k)
    out = {}
    for I in combinations(range(1, m + 1), p):
        for J in combinations(range(1, k + 1), q):
            c = rand_poly(r, coords, degree, terms, hbar)
            if not c.is_zero():
                out[(I, J)] = c
    return MixedMultivector(m, k, out)


def rand_sigma(r: random.Random, m: int, k: int, degree: int = 1, terms: int = 2) -> MixedMultivector:
    """Random total-degree-2 element with O(h) bivector and mixed parts.
    Generically not Maurer-Cartan."""
    pi = rand_multivector(r, m, k, 2, 0, degree, terms, hbar=1)
    phi = rand_multivector(r, m, k, 1, 1, degree, terms, hbar=1)
    omega = rand_multivector(r, m, k, 0, 2, degree, terms)
    return pi + phi + omega
