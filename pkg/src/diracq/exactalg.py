"""Exact scalar arithmetic: sparse rational polynomials, rational functions,
truncated formal series in hbar, a literal parser and a sparse exact solver.

Variables are identified by integer ids whose natural order is the canonical
variable order ``x1..xm, b1..bk, t, s, u, h``::

    x_i -> i          b_j -> 1000 + j
    t   -> 2001       s   -> 2002       u -> 2003
    h   -> 3000       (the deformation parameter hbar)

A monomial is a tuple of ``(var_id, exponent)`` pairs sorted by ``var_id``
with positive exponents.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "ExactAlgError",
    "ParseError",
    "Poly",
    "RatFunc",
    "HSeries",
    "X",
    "B",
    "T",
    "S",
    "U",
    "H",
    "xvar",
    "bvar",
    "var_name",
    "var_id",
    "parse",
    "ratfunc",
    "scalar",
    "hseries_mul",
    "hseries_invert",
    "interval_eval",
    "check_denominator",
    "solve_sparse",
    "matrix_rank",
    "grid_points",
]


class ExactAlgError(ValueError):
    pass


class ParseError(ExactAlgError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"parse error at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


T, S, U, H = 2001, 2002, 2003, 3000
_PARAMS = {"t": T, "s": S, "u": U, "h": H}
_PARAM_NAMES = {v: k for k, v in _PARAMS.items()}


def xvar(i: int) -> int:
    if not 1 <= i < 1000:
        raise ExactAlgError(f"bad x index {i}")
    return i


def bvar(j: int) -> int:
    if not 1 <= j < 1000:
        raise ExactAlgError(f"bad b index {j}")
    return 1000 + j


def var_name(v: int) -> str:
    if v < 1000:
        return f"x{v}"
    if v < 2000:
        return f"b{v - 1000}"
    return _PARAM_NAMES[v]


def var_id(name: str) -> int:
    if name in _PARAMS:
        return _PARAMS[name]
    m = re.fullmatch(r"([xb])([1-9][0-9]*)", name)
    if not m:
        raise ExactAlgError(f"unknown variable {name!r}")
    i = int(m.group(2))
    return xvar(i) if m.group(1) == "x" else bvar(i)


def _norm(c):
    if type(c) is Fraction and c.denominator == 1:
        return c.numerator
    return c


def mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def mono_degree(m: tuple, var: int | None = None) -> int:
    if var is None:
        return sum(e for _, e in m)
    for v, e in m:
        if v == var:
            return e
    return 0


class Poly:
    """Immutable sparse polynomial with rational coefficients."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                if c:
                    clean[m] = _norm(c)
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "Poly":
        p = object.__new__(cls)
        p.terms = terms
        p._hash = None
        return p

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)} if c else {})

    @classmethod
    def var(cls, v: int, power: int = 1) -> "Poly":
        return cls._raw({((v, power),): 1} if power else {(): 1})

    @classmethod
    def monomial(cls, mono: tuple, coeff=1) -> "Poly":
        return cls({mono: coeff})

    # structural

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        if isinstance(other, Poly):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def const_value(self) -> Fraction:
        if not self.is_const():
            raise ExactAlgError(f"{self} is not a constant")
        return Fraction(self.terms.get((), 0))

    def variables(self) -> set[int]:
        return {v for m in self.terms for v, _ in m}

    def degree(self, vars: Iterable[int] | None = None) -> int:
        if not self.terms:
            return -1
        if vars is None:
            return max(mono_degree(m) for m in self.terms)
        vs = set(vars)
        return max(sum(e for v, e in m if v in vs) for m in self.terms)

    # arithmetic

    def __neg__(self):
        return Poly._raw({m: -c for m, c in self.terms.items()})

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        elif not isinstance(other, Poly):
            return NotImplemented
        if not other.terms:
            return self
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Poly._raw(out)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        elif not isinstance(other, Poly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, Poly):
            return NotImplemented
        if len(self.terms) > len(other.terms):
            a, b = other.terms, self.terms
        else:
            a, b = self.terms, other.terms
        out: dict = {}
        for m1, c1 in a.items():
            for m2, c2 in b.items():
                m = mono_mul(m1, m2)
                v = out.get(m, 0) + c1 * c2
                if v:
                    out[m] = v
                else:
                    del out[m]
        return Poly._raw(out)

    __rmul__ = __mul__

    def scale(self, c) -> "Poly":
        if not isinstance(c, (int, Fraction)):
            return self * scalar(c)
        if not c:
            return ZERO
        if c == 1:
            return self
        return Poly._raw({m: _norm(v * c) for m, v in self.terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ExactAlgError("negative power of a polynomial")
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero")
            return self.scale(Fraction(1) / Fraction(other))
        if isinstance(other, Poly) and other.is_const():
            return self / other.const_value()
        return ratfunc(self, scalar(other))

    def diff(self, v: int, order: int = 1) -> "Poly":
        if order == 0:
            return self
        out = {}
        for m, c in self.terms.items():
            e = mono_degree(m, v)
            if e < order:
                continue
            f = 1
            for i in range(order):
                f *= e - i
            nm = tuple((w, (ew - order) if w == v else ew) for w, ew in m if w != v or ew > order)
            out[nm] = out.get(nm, 0) + c * f
        return Poly(out)

    def integrate(self, v: int) -> "Poly":
        """Antiderivative in ``v`` vanishing at ``v = 0``."""
        out = {}
        for m, c in self.terms.items():
            e = mono_degree(m, v)
            if e:
                nm = tuple((w, ew + 1 if w == v else ew) for w, ew in m)
            else:
                nm = tuple(sorted(m + ((v, 1),)))
            out[nm] = out.get(nm, 0) + Fraction(c, e + 1)
        return Poly(out)

    def integrate01(self, v: int) -> "Poly":
        return self.integrate(v).subs({v: ONE})

    def subs(self, mapping: Mapping[int, "Poly"]) -> "Poly":
        """Simultaneous substitution of polynomials for variables."""
        if not mapping:
            return self
        maps = {v: scalar(p) for v, p in mapping.items()}
        if any(not isinstance(p, Poly) for p in maps.values()):
            return _subs_general(self, maps)
        powers: dict = {}
        out = ZERO
        acc: dict = {}
        for m, c in self.terms.items():
            keep = []
            factor = ONE
            for v, e in m:
                if v in maps:
                    key = (v, e)
                    if key not in powers:
                        powers[key] = maps[v] ** e
                    factor = factor * powers[key]
                else:
                    keep.append((v, e))
            if factor is ONE:
                k = tuple(keep)
                acc[k] = acc.get(k, 0) + c
            else:
                out = out + factor * Poly._raw({tuple(keep): c})
        return out + Poly(acc)

    def evaluate(self, point: Mapping[int, Fraction]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            val = Fraction(c)
            for v, e in m:
                val *= Fraction(point.get(v, 0)) ** e
            total += val
        return total

    def truncate(self, order: int | None, var: int = H) -> "Poly":
        """Drop terms with ``var``-degree above ``order``."""
        if order is None:
            return self
        return Poly._raw({m: c for m, c in self.terms.items() if mono_degree(m, var) <= order})

    def coeff(self, var: int, n: int) -> "Poly":
        """Coefficient of ``var**n`` (a polynomial free of ``var``)."""
        out = {}
        for m, c in self.terms.items():
            if mono_degree(m, var) == n:
                out[tuple((w, e) for w, e in m if w != var)] = c
        return Poly._raw(out)

    def order(self, var: int = H) -> int | None:
        """Lowest ``var``-degree present, None for zero."""
        if not self.terms:
            return None
        return min(mono_degree(m, var) for m in self.terms)

    def max_order(self, var: int = H) -> int:
        if not self.terms:
            return -1
        return max(mono_degree(m, var) for m in self.terms)

    def split_var(self, var: int) -> dict[int, "Poly"]:
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            n = mono_degree(m, var)
            out.setdefault(n, {})[tuple((w, e) for w, e in m if w != var)] = c
        return {n: Poly._raw(t) for n, t in sorted(out.items())}

    def depends_on(self, vars: Iterable[int]) -> bool:
        vs = set(vars)
        return any(v in vs for m in self.terms for v, _ in m)

    # printing

    def sorted_terms(self):
        def key(item):
            m, _ = item
            vec = tuple(-e for _, e in m)
            return (-mono_degree(m), tuple(v for v, _ in m), vec)

        return sorted(self.terms.items(), key=key)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            c = Fraction(c)
            mono = "*".join(var_name(v) + (f"^{e}" if e > 1 else "") for v, e in m)
            mag = abs(c)
            if not m:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            s += f" {sign} {body}"
        return s

    def __repr__(self):
        return f"Poly({str(self)!r})"


ZERO = Poly._raw({})
ONE = Poly._raw({(): 1})


def _subs_general(p: Poly, maps):
    out = ZERO
    for m, c in p.terms.items():
        term = Poly._raw({(): c})
        for v, e in m:
            if v in maps:
                for _ in range(e):
                    term = term * maps[v]
            else:
                term = term * Poly.var(v, e)
        out = out + term
    return out


# rational functions

def _sympy_ring(vars: list[int]):
    from sympy import QQ
    from sympy.polys.rings import ring

    names = [var_name(v) for v in vars] or ["_z"]
    R, *_ = ring(",".join(names), QQ)
    return R


def _to_sympy(p: Poly, R, vars: list[int]):
    from sympy import QQ

    idx = {v: i for i, v in enumerate(vars)}
    n = max(len(vars), 1)
    d = {}
    for m, c in p.terms.items():
        e = [0] * n
        for v, k in m:
            e[idx[v]] = k
        c = Fraction(c)
        d[tuple(e)] = QQ(c.numerator, c.denominator)
    return R.from_dict(d) if d else R.zero


def _from_sympy(q, vars: list[int]) -> Poly:
    out = {}
    for exps, c in q.terms():
        m = tuple((vars[i], e) for i, e in enumerate(exps) if e and i < len(vars))
        out[m] = Fraction(int(c.numerator), int(c.denominator))
    return Poly(out)


class RatFunc:
    """Quotient of polynomials, gcd removed, denominator monic.

    Monic means the leading coefficient of the denominator in lex order over
    the canonical variable order is 1.  Instances with a constant
    denominator are never built: :func:`ratfunc` returns a :class:`Poly`.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        self.num = num
        self.den = den

    def __eq__(self, other):
        if isinstance(other, RatFunc):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (Poly, int, Fraction)):
            return False
        return NotImplemented

    def __hash__(self):
        return hash((self.num, self.den))

    def __bool__(self):
        return True

    def is_zero(self) -> bool:
        return False

    def is_const(self) -> bool:
        return False

    def variables(self):
        return self.num.variables() | self.den.variables()

    def depends_on(self, vars):
        return self.num.depends_on(vars) or self.den.depends_on(vars)

    def __neg__(self):
        return RatFunc(-self.num, self.den)

    def __add__(self, other):
        other = scalar(other)
        if isinstance(other, Poly):
            return ratfunc(self.num + other * self.den, self.den)
        return ratfunc(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-scalar(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = scalar(other)
        if isinstance(other, Poly):
            return ratfunc(self.num * other, self.den)
        return ratfunc(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def scale(self, c):
        if not isinstance(c, (int, Fraction)):
            return self * scalar(c)
        return ratfunc(self.num.scale(c), self.den)

    def __truediv__(self, other):
        other = scalar(other)
        if isinstance(other, Poly):
            return ratfunc(self.num, self.den * other)
        return ratfunc(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return ratfunc(scalar(other) * self.den, self.num)

    def __pow__(self, n: int):
        if n < 0:
            return ratfunc(self.den ** (-n), self.num ** (-n))
        return ratfunc(self.num ** n, self.den ** n)

    def diff(self, v: int, order: int = 1):
        out = self
        for _ in range(order):
            if not isinstance(out, RatFunc):
                return out.diff(v)
            out = ratfunc(out.num.diff(v) * out.den - out.num * out.den.diff(v), out.den * out.den)
        return out

    def subs(self, mapping):
        return scalar(self.num.subs(mapping)) / scalar(self.den.subs(mapping))

    def evaluate(self, point):
        d = self.den.evaluate(point)
        if d == 0:
            raise ExactAlgError(f"denominator {self.den} vanishes at {dict(point)}")
        return self.num.evaluate(point) / d

    def truncate(self, order, var: int = H):
        if order is None:
            return self
        if self.den.depends_on([var]):
            raise ExactAlgError("cannot truncate a rational function whose denominator involves the series variable")
        return ratfunc(self.num.truncate(order, var), self.den)

    def coeff(self, var: int, n: int):
        if self.den.depends_on([var]):
            raise ExactAlgError("series coefficient of a rational function with series-dependent denominator")
        return ratfunc(self.num.coeff(var, n), self.den)

    def max_order(self, var: int = H) -> int:
        return self.num.max_order(var)

    def order(self, var: int = H):
        return self.num.order(var)

    def __str__(self):
        return f"({self.num})/({self.den})"

    def __repr__(self):
        return f"RatFunc({str(self)!r})"


def ratfunc(num, den):
    """Normalized quotient; returns a :class:`Poly` when the denominator cancels."""
    num, den = scalar(num), scalar(den)
    if isinstance(num, RatFunc) or isinstance(den, RatFunc):
        return num * (ONE / den) if isinstance(den, RatFunc) else num / den
    if den.is_zero():
        raise ExactAlgError("rational function with zero denominator")
    if num.is_zero():
        return ZERO
    if den.is_const():
        return num / den.const_value()
    vars = sorted(num.variables() | den.variables())
    R = _sympy_ring(vars)
    p, q = _to_sympy(num, R, vars).cancel(_to_sympy(den, R, vars))
    num2, den2 = _from_sympy(p, vars), _from_sympy(q, vars)
    lc = Fraction(int(q.LC.numerator), int(q.LC.denominator)) if hasattr(q.LC, "numerator") else Fraction(str(q.LC))
    num2, den2 = num2.scale(1 / lc), den2.scale(1 / lc)
    if den2.is_const():
        return num2 / den2.const_value()
    return RatFunc(num2, den2)


def scalar(x):
    """Coerce ints, Fractions and literals to the ScalarExpr types."""
    if isinstance(x, (Poly, RatFunc)):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly.const(x)
    if isinstance(x, str):
        return parse(x)
    raise TypeError(f"cannot interpret {x!r} as a scalar")


# literal parser

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9]*)|(\S))")


def _tokenize(text: str, line: int):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        if m.lastindex is None:
            break
        col = m.start(m.lastindex) + 1
        if m.group(1) is not None:
            toks.append(("num", int(m.group(1)), col))
        elif m.group(2) is not None:
            toks.append(("var", m.group(2), col))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", line, col)
            toks.append((ch, ch, col))
        pos = m.end()
    toks.append(("end", None, len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str, line: int):
        self.toks = _tokenize(text, line)
        self.i = 0
        self.line = line

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            self.fail(f"expected {kind!r}")
        self.i += 1
        return tok

    def fail(self, msg):
        tok = self.peek()
        found = "end of input" if tok[0] == "end" else repr(str(tok[1]))
        raise ParseError(f"{msg}, found {found}", self.line, tok[2])

    def expr(self):
        val = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            val = val + rhs if op == "+" else val - rhs
        return val

    def term(self):
        val = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            if op == "*":
                val = val * rhs
            else:
                if scalar(rhs).is_zero():
                    self.fail("division by zero")
                val = scalar(val) / rhs
        return val

    def unary(self):
        if self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            val = self.unary()
            return -val if op == "-" else val
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "num":
                self.fail("expected integer exponent")
            self.take()
            base = base ** tok[1]
        return base

    def atom(self):
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            return Poly.const(tok[1])
        if tok[0] == "var":
            self.take()
            try:
                return Poly.var(var_id(tok[1]))
            except ExactAlgError:
                raise ParseError(f"unknown variable {tok[1]!r}", self.line, tok[2]) from None
        if tok[0] == "(":
            self.take()
            val = self.expr()
            self.take(")") if self.peek()[0] == ")" else self.fail("expected ')'")
            return val
        self.fail("expected a number, variable or '('")


def parse(text: str, line: int = 1):
    """Parse a polynomial (or rational-function) literal.

    >>> str(parse("(x1 + 1)*(x1 - 1)"))
    'x1^2 - 1'
    """
    p = _Parser(str(text), line)
    if p.peek()[0] == "end":
        p.fail("empty expression")
    val = p.expr()
    if p.peek()[0] != "end":
        p.fail("unexpected token")
    return val


# truncated series

class HSeries:
    """Formal series c0 + c1 h + ... + cH h^H, truncated at order H."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs: Iterable, order: int):
        cs = [scalar(c) if isinstance(c, (int, Fraction, str)) else c for c in coeffs]
        cs = cs[: order + 1]
        zero = Poly.const(0) if not cs else cs[0] * 0
        cs += [zero] * (order + 1 - len(cs))
        self.coeffs = tuple(cs)
        self.order = order

    @classmethod
    def from_poly(cls, p: Poly, order: int) -> "HSeries":
        return cls([p.coeff(H, n) for n in range(order + 1)], order)

    def to_poly(self) -> Poly:
        out = ZERO
        for n, c in enumerate(self.coeffs):
            out = out + scalar(c) * Poly.var(H, n)
        return out

    def _check(self, other):
        if not isinstance(other, HSeries):
            raise TypeError("expected an HSeries")
        if other.order != self.order:
            raise ExactAlgError(f"mismatched truncation orders {self.order} and {other.order}")

    def __eq__(self, other):
        if not isinstance(other, HSeries):
            return NotImplemented
        return self.order == other.order and all(a == b for a, b in zip(self.coeffs, other.coeffs))

    def __add__(self, other):
        self._check(other)
        return HSeries([a + b for a, b in zip(self.coeffs, other.coeffs)], self.order)

    def __sub__(self, other):
        self._check(other)
        return HSeries([a - b for a, b in zip(self.coeffs, other.coeffs)], self.order)

    def __neg__(self):
        return HSeries([-a for a in self.coeffs], self.order)

    def __mul__(self, other):
        return hseries_mul(self, other)

    def is_zero(self) -> bool:
        return all(scalar(c).is_zero() for c in self.coeffs)

    def __str__(self):
        parts = [f"({c})*h^{n}" for n, c in enumerate(self.coeffs) if not scalar(c).is_zero()]
        return " + ".join(parts) or "0"


def hseries_mul(a: HSeries, b: HSeries, mul=None) -> HSeries:
    """Cauchy product truncated at the common order; ``mul`` overrides the
    coefficient product (e.g. a star product)."""
    a._check(b)
    mul = mul or (lambda p, q: p * q)
    n = a.order
    out = []
    for k in range(n + 1):
        acc = None
        for i in range(k + 1):
            term = mul(a.coeffs[i], b.coeffs[k - i])
            acc = term if acc is None else acc + term
        out.append(acc)
    return HSeries(out, n)


def hseries_invert(a: HSeries, mul=None) -> HSeries:
    c0 = scalar(a.coeffs[0])
    if not c0.is_const() or c0.is_zero():
        raise ExactAlgError("non-unital element: leading coefficient is not a nonzero constant")
    mul = mul or (lambda p, q: p * q)
    inv0 = Fraction(1) / c0.const_value()
    out = [Poly.const(inv0)]
    for k in range(1, a.order + 1):
        acc = None
        for i in range(1, k + 1):
            term = mul(a.coeffs[i], out[k - i])
            acc = term if acc is None else acc + term
        out.append(-(acc * inv0))
    return HSeries(out, a.order)


# interval bounds and domain guard

def interval_eval(p: Poly, box: Mapping[int, tuple]) -> tuple[Fraction, Fraction]:
    """Enclosure of ``p`` over a box of closed rational intervals."""
    lo_tot = hi_tot = Fraction(0)
    for m, c in p.terms.items():
        lo = hi = Fraction(c)
        for v, e in m:
            a, b = (Fraction(x) for x in box.get(v, (0, 0)))
            if e % 2 == 0 and a < 0 < b:
                pa, pb = Fraction(0), max(a ** e, b ** e)
            else:
                pa, pb = sorted((a ** e, b ** e))
            cands = (lo * pa, lo * pb, hi * pa, hi * pb)
            lo, hi = min(cands), max(cands)
        lo_tot += lo
        hi_tot += hi
    return lo_tot, hi_tot


def grid_points(box: Mapping[int, tuple], n: int):
    vars = sorted(box)
    axes = []
    for v in vars:
        a, b = (Fraction(x) for x in box[v])
        axes.append([a + (b - a) * Fraction(i, n) for i in range(n + 1)] if n else [a])
    for pt in itertools.product(*axes):
        yield dict(zip(vars, pt))


def check_denominator(den: Poly, box: Mapping[int, tuple], grid: int = 4, depth: int = 6) -> int:
    """Return the uniform sign of ``den`` on ``box``.

    The denominator is evaluated on a regular ``(grid+1)^d`` grid and must
    keep one sign there; an interval enclosure with bisection then tries to
    certify the sign on the whole box.  When the enclosure stays
    inconclusive the grid verdict stands (the guard is not exhaustive).
    """
    sign = 0
    for pt in grid_points(box, grid):
        v = den.evaluate(pt)
        if v == 0:
            raise ExactAlgError(f"denominator {den} vanishes at {_fmt_point(pt)}")
        s = 1 if v > 0 else -1
        if sign and s != sign:
            raise ExactAlgError(f"denominator {den} changes sign on the domain box")
        sign = s
    if sign == 0:
        sign = 1 if den.const_value() > 0 else -1

    def certify(b, d):
        lo, hi = interval_eval(den, b)
        if lo > 0 or hi < 0:
            return True
        if d == 0:
            return False
        v = max(b, key=lambda w: b[w][1] - b[w][0])
        a, c = b[v]
        mid = (Fraction(a) + Fraction(c)) / 2
        return certify({**b, v: (a, mid)}, d - 1) and certify({**b, v: (mid, c)}, d - 1)

    certify(dict(box), depth)
    return sign


def _fmt_point(pt):
    return "{" + ", ".join(f"{var_name(v)}={c}" for v, c in sorted(pt.items())) + "}"


# exact linear algebra

def solve_sparse(columns: list[Mapping], target: Mapping):
    """Solve ``sum_j x_j * columns[j] == target`` exactly.

    Columns are sparse vectors (dict key -> rational).  Columns are pivoted
    in the given order and columns dependent on earlier ones get zero, so
    the solution is supported on the earliest independent columns.  Returns
    a list of Fractions, or None when the system is inconsistent.
    """
    pivots: dict = {}  # pivot key -> (reduced vector, combination)
    order: list = []
    occurs: dict = {}  # key -> pivot keys whose vector has an entry there
    for j, col in enumerate(columns):
        vec = {k: Fraction(v) for k, v in col.items() if v}
        comb = {j: Fraction(1)}
        vec, comb = _reduce(vec, comb, pivots, order)
        if vec:
            key = min(vec, key=_keyorder)
            inv = 1 / vec[key]
            vec = {k: v * inv for k, v in vec.items()}
            comb = {k: v * inv for k, v in comb.items()}
            # keep existing pivots fully reduced against the new one
            for pk in sorted(occurs.get(key, ()), key=_keyorder):
                pv, pc = pivots[pk]
                f = pv.get(key)
                if f:
                    for k in pv:
                        occurs[k].discard(pk)
                    pv = _axpy(pv, vec, -f)
                    pivots[pk] = (pv, _axpy(pc, comb, -f))
                    for k in pv:
                        occurs.setdefault(k, set()).add(pk)
            pivots[key] = (vec, comb)
            for k in vec:
                occurs.setdefault(k, set()).add(key)
            order.append(key)
    tvec = {k: Fraction(v) for k, v in target.items() if v}
    rest, comb = _reduce(tvec, {}, pivots, order)
    if rest:
        return None
    sol = [Fraction(0)] * len(columns)
    for j, v in comb.items():
        sol[j] = -v
    return sol


def _keyorder(k):
    return repr(k)


def _axpy(a: dict, b: dict, f) -> dict:
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, 0) + f * v
        if w:
            out[k] = w
        else:
            out.pop(k, None)
    return out


def _reduce(vec, comb, pivots, order):
    for key in [k for k in vec if k in pivots]:
        f = vec.get(key)
        if not f:
            continue
        pv, pc = pivots[key]
        vec = _axpy(vec, pv, -f)
        comb = _axpy(comb, pc, -f)
    return vec, comb


def matrix_rank(rows: list[list]) -> int:
    m = [[Fraction(x) for x in r] for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def X(i: int) -> Poly:
    return Poly.var(xvar(i))


def B(j: int) -> Poly:
    return Poly.var(bvar(j))
