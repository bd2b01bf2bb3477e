"""Scenario runner: load a YAML/JSON scenario, run its checks, print a report.

Exit status is 0 when every check passes, 1 when any check fails or errors,
and 2 for usage, parse and reference errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any

import yaml

from . import algebroid as alg
from . import holonomy as hol
from .dirac import GenSection, chart_coords, courant, lemma1_equivalence, lemma2_degree_check, pairing
from .exactalg import H, ExactAlgError, ParseError, Poly, parse, scalar, var_id, xvar
from .family import TightFamily, gauge_family, mc4_check, quantize_family
from .geom import MixedMultivector, mc_residual_L
from .randgen import rand_section, rand_sigma, rng
from .star import PolyDiffOp, StarProduct, assoc_residual, kontsevich2, moyal, poisson_matrix

__all__ = ["main", "run", "load_scenario", "ScenarioError", "CHECK_KINDS"]

SECTIONS = ("sigma", "star_product", "tight_family", "path", "disk", "chart", "sections",
            "homotopies", "cover", "checks")


class ScenarioError(ExactAlgError):
    """Malformed scenario: bad structure or unresolved reference (exit 2)."""


# YAML loading with source positions for scalars

class _Str(str):
    line = 1
    column = 1
    quoted = False


class _Loader(yaml.SafeLoader):
    pass


def _construct_str(loader, node):
    s = _Str(loader.construct_scalar(node))
    s.line = node.start_mark.line + 1
    s.column = node.start_mark.column + 1
    s.quoted = node.style in ("'", '"')
    return s


_Loader.add_constructor("tag:yaml.org,2002:str", _construct_str)


def _poly(text) -> Any:
    """Parse a literal; errors report file line and column."""
    if isinstance(text, (int, Fraction)):
        return scalar(text)
    if not isinstance(text, str):
        raise ScenarioError(f"expected a polynomial literal, got {text!r}")
    try:
        return parse(text)
    except ParseError as e:
        line = getattr(text, "line", 1) + e.line - 1
        col = getattr(text, "column", 1) + e.column - 1 + (1 if getattr(text, "quoted", False) else 0)
        raise ParseError(str(e).split(": ", 1)[-1], line, col) from None


def _frac(x) -> Fraction:
    v = _poly(x)
    if not v.is_const():
        raise ScenarioError(f"expected a rational constant, got {x}")
    return v.const_value()


def _indices(text: str) -> tuple:
    return tuple(int(c) for c in str(text).replace(",", "").strip())


def _multi(text: str, m: int) -> tuple:
    parts = [p for p in str(text).split(",") if p.strip()]
    alpha = tuple(int(p) for p in parts)
    if len(alpha) != m:
        raise ScenarioError(f"multi-index {text!r} must have {m} entries")
    return alpha


def load_scenario(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.load(fh, Loader=_Loader)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        raise ParseError(e.problem or "malformed scenario", mark.line + 1, mark.column + 1) from None
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS) - {"name", "hbar_order", "ring", "quantize"})
    if unknown:
        raise ScenarioError(f"unknown scenario sections: {', '.join(unknown)}")
    if data.get("ring", "QQ") != "QQ":
        raise ScenarioError("only the rational coefficient ring QQ is supported")
    return data


class Scenario:
    """Named objects built lazily from the raw scenario mapping."""

    def __init__(self, data: dict, flags: argparse.Namespace):
        self.data = data
        self.name = str(data.get("name", "scenario"))
        self.order = flags.hbar_order if flags.hbar_order is not None else int(data.get("hbar_order", 2))
        q = data.get("quantize") or {}
        self.degree_bound = flags.degree_bound if flags.degree_bound is not None else q.get("degree_bound")
        self.order_bound = flags.order_bound if flags.order_bound is not None else q.get("order_bound")
        self.grid = flags.grid
        self.seed = flags.seed
        self._cache: dict = {}
        self.checks = self._checks()
        self._validate()

    # references

    def _section(self, kind: str) -> dict:
        sec = self.data.get(kind) or {}
        if not isinstance(sec, dict):
            raise ScenarioError(f"section {kind!r} must be a mapping of names")
        return sec

    def _raw(self, kind: str, name: str):
        sec = self._section(kind)
        if name not in sec:
            raise ScenarioError(f"unresolved reference: {kind} {name!r}")
        return sec[name]

    def get(self, kind: str, name: str):
        key = (kind, name)
        if key not in self._cache:
            self._cache[key] = getattr(self, "_build_" + kind)(self._raw(kind, name))
        return self._cache[key]

    def _checks(self) -> list[dict]:
        raw = self.data.get("checks") or []
        if not isinstance(raw, list):
            raise ScenarioError("checks must be a list")
        out, seen = [], set()
        for i, c in enumerate(raw):
            if not isinstance(c, dict) or "check" not in c:
                raise ScenarioError(f"check #{i + 1} needs a 'check' kind")
            if c["check"] not in CHECK_KINDS:
                raise ScenarioError(f"unknown check kind {c['check']!r}")
            name = str(c.get("name", f"{c['check']}-{i + 1:02d}"))
            if name in seen:
                raise ScenarioError(f"duplicate check name {name!r}")
            seen.add(name)
            out.append({**c, "name": name})
        return out

    def _validate(self):
        refs = {"sigma": "sigma", "star": "star_product", "family": "tight_family", "path": "path",
                "disk": "disk", "disk2": "disk", "disk1": "disk", "chart": "chart"}
        for c in self.checks:
            for key, kind in refs.items():
                if key in c:
                    self._raw(kind, c[key])
            for key in ("X", "Y", "Z"):
                if key in c:
                    self._raw("sections", c[key])
            for key in ("h", "h1", "h2", "hh"):
                if key in c:
                    self._raw("homotopies", c[key])
            for key in ("V", "U", "W"):
                if key in c:
                    self._raw("cover", c[key])
        # cheap objects are built eagerly so that literal errors surface at load
        for kind in ("sigma", "path", "disk", "sections", "homotopies", "cover"):
            for name in self._section(kind):
                self.get(kind, name)

    # builders

    def _build_sigma(self, spec) -> MixedMultivector:
        m, k = int(spec["m"]), int(spec.get("k", 0))
        terms = {}
        for key, coeff in (spec.get("terms") or {}).items():
            I, _, J = str(key).partition("|")
            I, J = _indices(I), _indices(J)
            if len(I) + len(J) != 2:
                raise ScenarioError(f"sigma term {key!r} does not have total degree 2")
            terms[(I, J)] = _poly(coeff)
        return MixedMultivector(m, k, terms)

    def _op(self, m: int, arity: int, spec) -> PolyDiffOp:
        terms = {}
        for key, coeff in (spec or {}).items():
            slots = str(key).split("|") if arity > 1 else [str(key)]
            if len(slots) != arity:
                raise ScenarioError(f"operator key {key!r} needs {arity} slots")
            terms[tuple(_multi(s, m) for s in slots)] = _poly(coeff)
        return PolyDiffOp(m, arity, terms)

    def _build_star_product(self, spec) -> StarProduct:
        if "moyal" in spec:
            return moyal(self.get("sigma", spec["moyal"]), self.order)
        if "kontsevich2" in spec:
            return kontsevich2(self.get("sigma", spec["kontsevich2"]), self.order)
        if "quantize" in spec:
            return self._quantize(self.get("sigma", spec["quantize"])).star_product()
        m = int(spec["m"])
        return StarProduct(self._op(m, 2, spec.get("correction")), self.order)

    def _quantize(self, sigma) -> TightFamily:
        return quantize_family(sigma, self.order, self.degree_bound, self.order_bound)

    def _tau2(self, spec) -> dict:
        out = {}
        for key, val in (spec or {}).items():
            i, j = _indices(key)
            out[(i, j)] = _poly(val)
        return out

    def _build_tight_family(self, spec) -> TightFamily:
        if "quantize" in spec:
            return self._quantize(self.get("sigma", spec["quantize"]))
        if "gauge" in spec:
            g = spec["gauge"]
            S = self.get("star_product", g["star"])
            gens = [self._op(S.m, 1, x) if isinstance(x, dict) else _poly(x) for x in g["generators"]]
            tau2 = self._tau2(g["tau2"]) if "tau2" in g else None
            return gauge_family(S, gens, k=g.get("k"), tau2=tau2)
        if "explicit" in spec:
            e = spec["explicit"]
            S = self.get("star_product", e["star"])
            tau1 = tuple(self._op(S.m, 1, x) for x in e.get("tau1") or [])
            return TightFamily(S.m, len(tau1), self.order, S.correction, tau1, self._tau2(e.get("tau2")))
        raise ScenarioError("tight_family needs one of quantize, gauge, explicit")

    def _build_path(self, spec) -> hol.PathB:
        return hol.PathB(tuple(_poly(c) for c in spec))

    def _build_disk(self, spec) -> hol.DiskB:
        return hol.DiskB(tuple(_poly(c) for c in spec))

    def _box(self, spec) -> dict:
        return {var_id(str(v)): (_frac(lo), _frac(hi)) for v, (lo, hi) in (spec or {}).items()}

    def _build_chart(self, spec) -> alg.FoliatedChart:
        return alg.FoliatedChart(self.get("sigma", spec["sigma"]), self.order, self._box(spec.get("box")),
                                 self.degree_bound, self.order_bound)

    def _build_sections(self, spec) -> alg.CrossSection:
        return alg.CrossSection(tuple(_poly(c) for c in spec))

    def _build_homotopies(self, spec) -> alg.SectionHomotopy:
        if isinstance(spec, dict) and "straight" in spec:
            X, Y = spec["straight"]
            return alg.SectionHomotopy.straight(self.get("sections", X), self.get("sections", Y))
        return alg.SectionHomotopy(tuple(_poly(c) for c in spec))

    def _build_cover(self, spec) -> dict:
        return self._box(spec)


# checks; each returns (ok, residual text or None, detail text or None)

def _fmt_rows(rows) -> str | None:
    return "; ".join(f"{lab}: {r}" for lab, r in rows) or None


def _d_function(f, coords) -> GenSection:
    n = len(coords)
    return GenSection(coords, tuple([Poly()] * n), tuple(f.diff(z) for z in coords))


def _check_courant(sc: Scenario, c: dict):
    r = rng(sc.seed)
    m, k = int(c.get("m", 2)), int(c.get("k", 1))
    count, degree = int(c.get("count", 100)), int(c.get("degree", 2))
    coords = chart_coords(m, k)
    for i in range(count):
        a, b, d = (rand_section(r, m, k, degree) for _ in range(3))
        lhs = courant(a, courant(b, d))
        rhs = courant(courant(a, b), d) + courant(b, courant(a, d))
        if not (lhs - rhs).is_zero():
            return False, f"leibniz case {i}: {lhs - rhs}", None
        sym = courant(a, a) - _d_function(pairing(a, a), coords).scale(Fraction(1, 2))
        if not sym.is_zero():
            return False, f"symmetric part case {i}: {sym}", None
    return True, None, f"{count} random triples, m={m}, k={k}, degree<={degree}"


def _check_lemma1(sc: Scenario, c: dict):
    if "sigma" in c:
        cases = [("", sc.get("sigma", c["sigma"]))]
    else:
        r = rng(sc.seed)
        m, k = int(c.get("m", 2)), int(c.get("k", 1))
        cases = [(f"random {i}: ", rand_sigma(r, m, k)) for i in range(int(c.get("count", 20)))]
    for label, sigma in cases:
        rep = lemma1_equivalence(sigma, sc.order, grid=sc.grid)
        if not rep.agree:
            return False, f"{label}{rep.mc_residual}", f"{label}dirac={rep.dirac}"
    return True, None, f"{len(cases)} case(s) agree"


def _check_lemma2(sc: Scenario, c: dict):
    rep = lemma2_degree_check(sc.get("sigma", c["sigma"]), grid=sc.grid)
    return rep.ok, "; ".join(rep.violations) or None, None


def _check_mc(sc: Scenario, c: dict):
    res = mc_residual_L(sc.get("sigma", c["sigma"]), sc.order)
    return res.is_zero(), None if res.is_zero() else str(res), None


def _check_mc4(sc: Scenario, c: dict):
    rep = mc4_check(sc.get("tight_family", c["family"]))
    bad = [line for i, line in enumerate(rep.describe()) if i + 1 in rep.failing()]
    return rep.ok, "; ".join(bad) or None, None


def _monomials(m: int, degree: int) -> list:
    return hol._test_functions(m, degree)


def _check_quantize(sc: Scenario, c: dict):
    if "star" in c:
        S = sc.get("star_product", c["star"])
    else:
        S = sc.get("tight_family", c["family"]).star_product()
    monos = _monomials(S.m, int(c.get("degree", 2)))
    triples = [(f, g, h) for f in monos for g in monos for h in monos]
    rep = assoc_residual(S, triples, operator=bool(c.get("operator", False)))
    if not rep.ok:
        bad = [(f"({f}, {g}, {h})", r) for (f, g, h), r in rep.pointwise if not r.is_zero()]
        return False, _fmt_rows(bad) or f"operator: {rep.operator}", None
    if "poisson" in c:
        P = poisson_matrix(sc.get("sigma", c["poisson"]))
        rows = []
        for i in range(1, S.m + 1):
            for j in range(1, S.m + 1):
                xi, xj = Poly.var(xvar(i)), Poly.var(xvar(j))
                r = S.commutator(xi, xj).coeff(H, 1) - scalar(P[i - 1][j - 1]).coeff(H, 1)
                rows.append((f"[x{i}, x{j}]", r))
        bad = [(lab, r) for lab, r in rows if not r.is_zero()]
        if bad:
            return False, _fmt_rows(bad), None
    return True, None, f"{len(triples)} triples"


def _check_transport(sc: Scenario, c: dict):
    Tf = sc.get("tight_family", c["family"])
    gamma = sc.get("path", c["path"])
    monos = _monomials(Tf.m, int(c.get("degree", 1)))
    F = hol.transport(Tf, gamma)
    rows = []
    rep = hol.transport_iso_check(Tf, gamma, [(f, g) for f in monos for g in monos])
    rows += list(rep.residuals)
    back = hol.transport(Tf, gamma.reverse())
    rows += [(f"inverse {f}", back(F(f)) - f) for f in monos]
    if "reparam" in c:
        G = hol.transport(Tf, gamma.reparam(_poly(c["reparam"])))
        rows += [(f"reparam {f}", G(f) - F(f)) for f in monos]
    if "split" in c:
        a = _frac(c["split"])
        G = hol.transport(Tf, gamma.restrict(a, 1)).after(hol.transport(Tf, gamma.restrict(0, a)))
        rows += [(f"functorial {f}", G(f) - F(f)) for f in monos]
    for f, img in (c.get("expect") or {}).items():
        rows.append((f"expect {f}", F(_poly(f)) - _poly(img)))
    bad = [(lab, r) for lab, r in rows if not r.is_zero()]
    return not bad, _fmt_rows(bad), None


def _element_expect(a, c: dict):
    rows = []
    exp = c.get("expect") or {}
    if "lambda" in exp:
        rows.append(("lambda", Poly.const(a.lam - _frac(exp["lambda"]))))
    if "unital" in exp:
        rows.append(("unital", a.unital - _poly(exp["unital"])))
    return rows


def _check_holonomy(sc: Scenario, c: dict):
    Tf = sc.get("tight_family", c["family"])
    D = sc.get("disk", c["disk"])
    a = hol.disk_holonomy(Tf, D)
    rows = _element_expect(a, c)
    rep = hol.relation1_check(Tf, D, degree=int(c.get("degree", 2)))
    rows += list(rep.residuals)
    bad = [(lab, r) for lab, r in rows if not r.is_zero()]
    return not bad, _fmt_rows(bad), str(a)


def _check_relations(sc: Scenario, c: dict):
    Tf = sc.get("tight_family", c["family"])
    D = sc.get("disk", c["disk"])
    rel = str(c.get("relation", "1"))
    if rel == "1":
        rep = hol.relation1_check(Tf, D, degree=int(c.get("degree", 2)))
    elif rel == "2":
        rep = hol.relation2_check(Tf, D, sc.get("disk", c["disk2"]))
    elif rel == "3":
        rep = hol.relation3_check(Tf, D, sc.get("disk", c["disk1"]), sc.get("disk", c["disk2"]))
    elif rel == "naturality":
        rep = hol.naturality_check(Tf, D)
    else:
        raise ScenarioError(f"unknown relation {rel!r}")
    return rep.ok, _fmt_rows(rep.residuals), rep.detail or None


def _check_algebroid(sc: Scenario, c: dict):
    ch = sc.get("chart", c["chart"])
    kind = c.get("kind", "hom_build")
    sec = lambda key: sc.get("sections", c[key])  # noqa: E731
    degree = int(c.get("degree", 2))
    if kind == "hom_build":
        d = alg.hom_build(ch, sec("X"), sec("Y"), sc.get("homotopies", c["h"]), degree)
        rows = list(d.report.residuals)
        for f, img in (c.get("expect") or {}).items():
            rows.append((f"expect {f}", d(_poly(f)) - _poly(img)))
        rows = [(lab, r) for lab, r in rows if not r.is_zero()]
        return not rows, _fmt_rows(rows), None
    if kind == "hom_identify":
        h1, h2 = sc.get("homotopies", c["h1"]), sc.get("homotopies", c["h2"])
        fills = [sc.get("homotopies", name).phi for name in c["fillings"]]
        ids = [alg.hom_identify(ch, sec("X"), sec("Y"), h1, h2, f, degree) for f in fills]
        rows = []
        for name, ident in zip(c["fillings"], ids):
            rows += [(f"{name} relation1 {lab}", r) for lab, r in ident.relation1.residuals]
            rows += [(f"{name} {lab}", r) for lab, r in _element_expect(ident.element, c)]
        a0 = ids[0].element
        for name, ident in zip(c["fillings"][1:], ids[1:]):
            b = ident.element
            rows.append((f"{name} lambda", Poly.const(b.lam - a0.lam)))
            rows.append((f"{name} unital", b.unital - a0.unital))
        bad = [(lab, r) for lab, r in rows if not r.is_zero()]
        return not bad, _fmt_rows(bad), str(a0)
    if kind == "triangle":
        co = alg.triangle_coherence(ch, sec("X"), sec("Y"), sec("Z"), degree)
        return co.report.ok, _fmt_rows(co.report.residuals), str(co.element)
    if kind == "restriction":
        V, U_ = sc.get("cover", c["V"]), sc.get("cover", c["U"])
        d = alg.restriction_hom(ch, V, U_, sec("X"), sec("Y"), degree)
        rows = list(d.report.residuals)
        return not rows, _fmt_rows(rows), None
    if kind == "nesting":
        V, U_, W = (sc.get("cover", c[key]) for key in ("V", "U", "W"))
        co = alg.nesting_coherence(ch, V, U_, W, sec("X"), sec("Y"), sec("Z"), degree)
        return co.report.ok, _fmt_rows(co.report.residuals), str(co.element)
    raise ScenarioError(f"unknown algebroid check kind {kind!r}")


CHECK_KINDS = {
    "courant-identities": _check_courant,
    "lemma1": _check_lemma1,
    "lemma2": _check_lemma2,
    "mc": _check_mc,
    "mc4": _check_mc4,
    "quantize": _check_quantize,
    "transport": _check_transport,
    "holonomy": _check_holonomy,
    "relations": _check_relations,
    "algebroid-coherence": _check_algebroid,
}


def _run_one(sc: Scenario, c: dict, timing: bool) -> dict:
    t0 = time.perf_counter()
    try:
        ok, residual, detail = CHECK_KINDS[c["check"]](sc, c)
        status = "pass" if ok else "fail"
        if c.get("expect_fail"):
            status = "fail" if ok else "pass"
        if c.get("expect_error"):
            status, detail = "fail", "expected an error: " + str(c["expect_error"])
    except (ExactAlgError, ArithmeticError, KeyError, ValueError, TypeError) as e:
        status, residual, detail = "error", None, f"{type(e).__name__}: {e}"
        if c.get("expect_error") and str(c["expect_error"]) in str(e):
            status = "pass"
    row = {"name": c["name"], "check": c["check"], "status": status, "residual": residual, "detail": detail}
    if timing:
        row["timing"] = round(time.perf_counter() - t0, 3)
    return row


_WORKER: dict = {}


def _worker(args):
    path, flags, index = args
    key = (path, repr(sorted(vars(flags).items())))
    if key not in _WORKER:
        _WORKER.clear()
        _WORKER[key] = Scenario(load_scenario(path), flags)
    sc = _WORKER[key]
    return _run_one(sc, sc.checks[index], flags.timing)


def run(path: str, flags: argparse.Namespace) -> dict:
    """Run the scenario at ``path``; returns the report mapping."""
    sc = Scenario(load_scenario(path), flags)
    wanted = set(flags.check or [])
    missing = wanted - {c["name"] for c in sc.checks} - {c["check"] for c in sc.checks}
    if missing:
        raise ScenarioError(f"no check named {', '.join(sorted(missing))}")
    idx = [i for i, c in enumerate(sc.checks) if not wanted or c["name"] in wanted or c["check"] in wanted]
    if flags.jobs > 1 and len(idx) > 1:
        with ProcessPoolExecutor(max_workers=flags.jobs) as ex:
            rows = list(ex.map(_worker, [(path, flags, i) for i in idx]))
    else:
        rows = [_run_one(sc, sc.checks[i], flags.timing) for i in idx]
    rows.sort(key=lambda r: r["name"])
    status = "pass" if all(r["status"] == "pass" for r in rows) else "fail"
    return {
        "scenario": sc.name,
        "seed": sc.seed,
        "hbar_order": sc.order,
        "status": status,
        "summary": {s: sum(r["status"] == s for r in rows) for s in ("pass", "fail", "error")},
        "checks": rows,
    }


def format_text(report: dict) -> str:
    lines = [f"scenario {report['scenario']} (seed {report['seed']}, H={report['hbar_order']})"]
    for r in report["checks"]:
        line = f"{r['status'].upper():5} {r['name']} [{r['check']}]"
        if "timing" in r:
            line += f" {r['timing']:.3f}s"
        lines.append(line)
        if r["residual"]:
            lines.append(f"      residual: {r['residual']}")
        if r["detail"] and r["status"] != "pass":
            lines.append(f"      detail: {r['detail']}")
    s = report["summary"]
    lines.append(f"{report['status'].upper()}: {s['pass']} passed, {s['fail']} failed, {s['error']} errors")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diracq", description="Run exact checks on a scenario file.")
    p.add_argument("scenario", help="YAML or JSON scenario file")
    p.add_argument("--hbar-order", type=int, default=None, help="truncation order H (overrides the scenario)")
    p.add_argument("--degree-bound", type=int, default=None, help="quantizer monomial degree bound")
    p.add_argument("--order-bound", type=int, default=None, help="quantizer derivative order bound")
    p.add_argument("--grid", type=int, default=4, help="validation grid resolution N")
    p.add_argument("--seed", type=int, default=0, help="seed for random-case generation")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--check", action="append", help="run only this check (name or kind); repeatable")
    p.add_argument("--jobs", type=int, default=1, help="number of worker processes")
    p.add_argument("--timing", action="store_true", help="include per-check timings (not deterministic)")
    p.add_argument("--output", "-o", default=None, help="write the report to this file")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        flags = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        report = run(flags.scenario, flags)
    except (ParseError, ScenarioError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ExactAlgError as e:
        print(f"error: invalid scenario object: {e}", file=sys.stderr)
        return 2
    if flags.format == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = format_text(report)
    if flags.output:
        with open(flags.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report["status"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
