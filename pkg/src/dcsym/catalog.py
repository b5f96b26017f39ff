"""Classification tables as case files, and the batch verifier.

Every table row lives in its own ``.case`` file under ``cases/v1``; the
additional transformations, the gauge bridges between twin rows and the
reduction chains live next to them.  A row is verified at a concrete
instantiation of its parameters: the equation must be in the class, every
listed operator must be a symmetry, the operators must span a Lie algebra
of the stated dimension and the kernel operator must lie in it.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import sympy as sp

from .equation import DCEquation, gauge_check, validate
from .expr import (DcsymError, SideRelation, SignAtom, Verdict, is_zero, opaque, param,
                   substitute, t, u, x)
from .parser import CaseSpec, ParseContext, ParseError, format_expr, parse_case_file, parse_expr
from .symmetry import (DT, REDUCED, DecompositionAmbiguous, Report, VectorField, bind_field,
                       check_symmetry, closure_check, combine, determining_system,
                       verdict_of)
from .transforms import PointTransformation, compose, invert, verify_maps

ELEMENTS = ("f", "g", "h", "A", "B")
VARS = {"t": t, "x": x, "u": u}
CASE_DIR = Path(__file__).with_name("cases") / "v1"


class ConstraintViolated(DcsymError):
    """An instantiation breaks one of the row's parameter constraints."""


class UnknownCase(DcsymError):
    pass


class BadOverride(DcsymError):
    """An override names something the case does not declare."""


def case_dir() -> Path:
    env = os.environ.get("DCSYM_CASE_DIR")
    return Path(env) if env else CASE_DIR


# ---------------------------------------------------------------------------
# constraints

_TUPLE_IN = re.compile(r"^\((.*)\)\s+in\s+\{(.*)\}$")
_IN = re.compile(r"^(.*?)\s+(not in|in)\s+\{(.*)\}$")
_CMP = re.compile(r"^(.*?)\s*(==|!=|>=|<=|>|<)\s*(.*)$")


def _split_top(text, sep=","):
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        if ch == sep and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _compare(a, op, b) -> bool:
    d = sp.nsimplify(sp.sympify(a) - sp.sympify(b))
    if not d.is_number:
        raise ConstraintViolated(f"cannot decide {a} {op} {b}: not numeric")
    return {"==": d == 0, "!=": d != 0, ">=": d >= 0, "<=": d <= 0,
            ">": d > 0, "<": d < 0}[op]


@dataclass(frozen=True)
class Constraint:
    """One footnote condition, e.g. ``mu not in {-2, -4/3, -1}``."""

    label: str
    text: str

    def holds(self, values: dict, ctx: ParseContext) -> bool:
        def ev(s):
            return parse_expr(s, ctx).xreplace(values)

        text = self.text.strip()
        cond = re.match(r"^if\s+(.*?):\s*(.*)$", text)
        if cond:
            if not Constraint(self.label, cond.group(1)).holds(values, ctx):
                return True
            text = cond.group(2)
        m = _TUPLE_IN.match(text)
        if m:
            names = [ev(s) for s in _split_top(m.group(1))]
            for option in _split_top(m.group(2)):
                entries = _split_top(option.strip()[1:-1])
                if len(entries) != len(names):
                    raise ParseError(f"constraint {self.label}: tuple size mismatch", (0, 0))
                ok = True
                for val, ent in zip(names, entries):
                    if ent == "*":
                        continue
                    if ent.startswith("*"):
                        c = re.match(r"^\*\s*(>=|<=|>|<|!=)\s*(.+)$", ent)
                        if c is None:
                            raise ParseError(f"constraint {self.label}: bad entry {ent!r}",
                                             (0, 0))
                        ok = ok and _compare(val, c.group(1), ev(c.group(2)))
                    else:
                        ok = ok and _compare(val, "==", ev(ent))
                if ok:
                    return True
            return False
        m = _IN.match(text)
        if m:
            val = ev(m.group(1))
            hit = any(_compare(val, "==", ev(s)) for s in _split_top(m.group(3)))
            return hit if m.group(2) == "in" else not hit
        m = _CMP.match(text)
        if m:
            return _compare(ev(m.group(1)), m.group(2), ev(m.group(3)))
        raise ParseError(f"constraint {self.label}: cannot read {text!r}", (0, len(text)))


# ---------------------------------------------------------------------------
# cases


@dataclass
class Instance:
    """A row at one parameter assignment."""

    case_id: str
    equation: DCEquation
    basis: list
    params: dict
    ctx: ParseContext

    def expr(self, text):
        return substitute(parse_expr(text, self.ctx), self.params)


def _natural_key(case_id: str):
    # primed tables sort after the unprimed ones
    parts = re.split(r"(\d+)", case_id.replace("'", "~"))
    return [int(p) if p.isdigit() else p for p in parts]


@dataclass
class ClassificationCase:
    id: str
    table: str
    gauge: str
    spec: CaseSpec
    path: str = ""

    @property
    def ctx(self) -> ParseContext:
        return self.spec.context()

    @property
    def defaults(self) -> dict:
        return dict(self.spec.section("params"))

    @property
    def constraints(self) -> list[Constraint]:
        return [Constraint(k, v) for k, v in self.spec.section("constraints").items()]

    @property
    def symmetry_texts(self) -> dict:
        return dict(self.spec.section("symmetries"))

    @property
    def dimension(self) -> int:
        return int(self.spec.section("expected").get("dimension", len(self.symmetry_texts)))

    @property
    def note(self) -> str:
        return self.spec.section("case").get("note", "")

    @property
    def chart(self) -> str:
        return self.spec.section("case").get("chart", "positive")

    @property
    def functions(self) -> dict:
        return dict(self.spec.section("functions"))

    @property
    def is_primed(self) -> bool:
        return "'" in self.table

    def extra_instantiations(self) -> dict:
        return dict(self.spec.section("instantiations"))

    def instantiate(self, overrides: dict | None = None, chart: str | None = None) -> Instance:
        """Equation and basis at the defaults updated by ``overrides``.

        Override keys may be parameters, elements (f, g, h, A, B) or opaque
        functions of the row; a function binding must satisfy the row's
        side relation for it.
        """
        overrides = dict(overrides or {})
        ctx = self.ctx
        values_txt = self.defaults
        elem_txt = dict(self.spec.section("equation"))
        binds = {}
        for k, v in overrides.items():
            if k in values_txt:
                values_txt[k] = v
            elif k in self.functions or (k in elem_txt and elem_txt[k] == "opaque"):
                binds[k] = v
            elif k in ELEMENTS:
                elem_txt[k] = v
            else:
                raise BadOverride(f"{self.id}: unknown parameter {k!r}")
        values = {}
        for k, v in values_txt.items():
            val = parse_expr(str(v), ParseContext({s.name for s in values}, {}, auto_params=False))
            values[param(k)] = val.xreplace(values)
        for c in self.constraints:
            if not c.holds(values, ctx):
                raise ConstraintViolated(f"{self.id}: constraint {c.label} ({c.text}) "
                                         f"violated at {_show(values)}")
        elems = {}
        for k in ELEMENTS:
            txt = elem_txt.get(k, "1" if k == "g" else None)
            if k == "g" and self.gauge == "g=h" and k not in elem_txt:
                continue
            if txt is None:
                raise ParseError(f"{self.id}: element {k} missing", (0, 0))
            if txt == "opaque":
                elems[k] = opaque(k, x if k in "fgh" else u)
            else:
                elems[k] = parse_expr(txt, ctx)
        elems.setdefault("g", elems["h"])
        rels = []
        for key, txt in self.spec.section("relations").items():
            name, _, suffix = key.partition("_")
            var = VARS[suffix[0]]
            rels.append(SideRelation(name, var, len(suffix), parse_expr(txt, ctx)))
        basis = [VectorField.from_text(txt, ctx) for txt in self.symmetry_texts.values()]
        # parameters first, then bound functions
        elems = {k: substitute(e, values) for k, e in elems.items()}
        rels = [SideRelation(r.func, r.var, r.order, substitute(r.rhs, values)) for r in rels]
        basis = [VectorField(*(substitute(c, values) for c in Q.components)) for Q in basis]
        for name, txt in binds.items():
            val = substitute(parse_expr(txt, ctx), values)
            rel = next((r for r in rels if r.func == name), None)
            if rel is not None:
                lhs = sp.diff(val, rel.var, rel.order)
                rhs = substitute(rel.rhs, {name: val})
                if is_zero(lhs - rhs, [r for r in rels if r.func != name]) is not Verdict.ZERO:
                    raise ConstraintViolated(f"{self.id}: {name} = {txt} does not satisfy "
                                             f"its defining relation")
            b = {name: val}
            elems = {k: substitute(e, b) for k, e in elems.items()}
            rels = [SideRelation(r.func, r.var, r.order, substitute(r.rhs, b))
                    for r in rels if r.func != name]
            basis = [VectorField(*(substitute(c, b) for c in Q.components)) for Q in basis]
        E = DCEquation(**elems, relations=tuple(rels), chart=chart or self.chart, name=self.id)
        return Instance(self.id, E, basis, values, ctx)


def _show(values):
    return ", ".join(f"{k}={v}" for k, v in values.items())


def _load_spec(path: Path) -> CaseSpec:
    return parse_case_file(path.read_text(encoding="utf-8"), str(path))


def load_case(path) -> ClassificationCase:
    path = Path(path)
    spec = _load_spec(path)
    head = spec.section("case")
    for key in ("id", "table", "gauge"):
        if key not in head:
            raise ParseError(f"{path}: [case] needs {key}", (0, 0))
    case = ClassificationCase(head["id"], head["table"], head["gauge"], spec, str(path))
    if case.dimension != len(case.symmetry_texts):
        raise ParseError(f"{path}: {len(case.symmetry_texts)} operators listed but dimension "
                         f"{case.dimension} expected", (0, 0))
    # default instantiation must satisfy the constraints
    case.instantiate()
    return case


def load_equation_file(path, overrides: dict | None = None, chart=None) -> Instance:
    """An equation from a file in the case format.

    A full case file gives its default instantiation; a bare file needs
    only an ``[equation]`` section (plus ``[params]``, ``[functions]`` and
    ``[relations]`` as required).  ``g`` defaults to 1.
    """
    path = Path(path)
    spec = _load_spec(path)
    if "case" in spec.sections:
        case = load_case(path)
    else:
        if "equation" not in spec.sections:
            raise ParseError(f"{path}: no [equation] section", (0, 0))
        case = ClassificationCase(path.stem, "", "g=1", spec, str(path))
    return case.instantiate(overrides, chart)


def load_map_file(path, source: Instance) -> PointTransformation:
    """The ``[map]`` section of a file, read in the source's names."""
    path = Path(path)
    spec = _load_spec(path)
    m = spec.section("map")
    missing = {"T", "X", "U"} - set(m)
    if missing:
        raise ParseError(f"{path}: [map] needs {', '.join(sorted(missing))}", (0, 0))
    ctx = ParseContext(set(source.ctx.params) | set(spec.section("params")),
                       dict(source.ctx.functions), auto_params=False)
    values = {param(k): parse_expr(v, ParseContext(set(), {}, auto_params=False))
              for k, v in spec.section("params").items()}
    T, X, U = (substitute(substitute(parse_expr(m[k], ctx), values), source.params)
               for k in ("T", "X", "U"))
    return PointTransformation.from_map(T, X, U, path.stem)


# ---------------------------------------------------------------------------
# transformations


@dataclass
class Transformation:
    """An additional equivalence transformation, a twin bridge or a chain."""

    id: str
    kind: str
    source: str
    target: str
    spec: CaseSpec
    path: str = ""

    @property
    def source_overrides(self) -> dict:
        return dict(self.spec.section("source"))

    @property
    def target_overrides(self) -> dict:
        return dict(self.spec.section("target"))

    @property
    def head(self) -> dict:
        return self.spec.section("transformation")

    @property
    def steps(self) -> list[str]:
        return [s.strip() for s in self.head.get("steps", "").split(",") if s.strip()]

    @property
    def note(self) -> str:
        return self.head.get("note", "")


def load_transformation(path) -> Transformation:
    path = Path(path)
    spec = _load_spec(path)
    head = spec.section("transformation")
    for key in ("id", "kind", "source", "target"):
        if key not in head:
            raise ParseError(f"{path}: [transformation] needs {key}", (0, 0))
    if head["kind"] != "chain" and not head.get("covered", "yes") == "no" \
            and set(spec.section("map")) != {"T", "X", "U"}:
        raise ParseError(f"{path}: [map] needs T, X and U", (0, 0))
    return Transformation(head["id"], head["kind"], head["source"], head["target"], spec,
                          str(path))


@dataclass
class Catalog:
    cases: dict
    transformations: dict

    def case(self, case_id: str) -> ClassificationCase:
        try:
            return self.cases[case_id]
        except KeyError:
            raise UnknownCase(f"no case {case_id!r}") from None

    def transformation(self, tid: str) -> Transformation:
        try:
            return self.transformations[tid]
        except KeyError:
            raise UnknownCase(f"no transformation {tid!r}") from None

    def of_kind(self, kind) -> list[Transformation]:
        return sorted((tr for tr in self.transformations.values() if tr.kind == kind),
                      key=lambda tr: _natural_key(tr.id))


@lru_cache(maxsize=4)
def _load_catalog(root: str) -> Catalog:
    base = Path(root)
    cases, trans = {}, {}
    for path in sorted(base.rglob("*.case")):
        spec_head = parse_case_file(path.read_text(encoding="utf-8"), str(path))
        if "transformation" in spec_head.sections:
            tr = load_transformation(path)
            if tr.id in trans:
                raise ParseError(f"{path}: duplicate transformation id {tr.id}", (0, 0))
            trans[tr.id] = tr
        else:
            c = load_case(path)
            if c.id in cases:
                raise ParseError(f"{path}: duplicate case id {c.id}", (0, 0))
            cases[c.id] = c
    return Catalog(cases, trans)


def load_catalog(root=None) -> Catalog:
    return _load_catalog(str(root or case_dir()))


def _dimension_of(case: ClassificationCase) -> int:
    return case.dimension


def list_cases(catalog: Catalog | None = None, *, table=None, gauge=None, dimension=None,
               filter_text=None) -> list[ClassificationCase]:
    """Rows matching all given filters, in table order.

    ``dimension`` is an int or a ``(op, n)`` pair; ``filter_text`` accepts
    ``dim>=4``, ``table=3'`` or ``gauge=g=h`` joined by commas.
    """
    catalog = catalog or load_catalog()
    conds = []
    if table is not None:
        conds.append(lambda c: c.table == str(table))
    if gauge is not None:
        if gauge not in ("g=1", "g=h"):
            raise ValueError(f"unknown gauge {gauge!r}")
        conds.append(lambda c: c.gauge == gauge)
    if dimension is not None:
        op, n = dimension if isinstance(dimension, tuple) else ("==", dimension)
        conds.append(lambda c, op=op, n=n: _compare(c.dimension, op, n))
    for part in (filter_text or "").split(","):
        part = part.strip()
        if not part:
            continue
        m = re.match(r"^(dim|table|gauge)\s*(>=|<=|==|=|>|<)\s*(.+)$", part)
        if m is None:
            raise ValueError(f"unknown filter {part!r}")
        key, op, val = m.groups()
        if key == "dim":
            op = "==" if op == "=" else op
            conds.append(lambda c, op=op, n=int(val): _compare(c.dimension, op, n))
        elif key == "table":
            conds.append(lambda c, v=val: c.table == v)
        else:
            conds.append(lambda c, v=val: c.gauge == v)
    out = [c for c in catalog.cases.values() if all(f(c) for f in conds)]
    return sorted(out, key=lambda c: _natural_key(c.id))


def resolve_case_ids(catalog: Catalog, table: str, case: str) -> list[str]:
    """Ids named by a table and a case label.

    ``("3", "15")`` names 3.15 itself when it exists and otherwise every
    lettered subcase 3.15a, 3.15b, ...
    """
    exact = f"{table}.{case}"
    if exact in catalog.cases:
        return [exact]
    pat = re.compile(re.escape(exact) + r"[a-z]\*?$")
    ids = [c for c in catalog.cases if pat.match(c)]
    if not ids:
        raise UnknownCase(f"no case {exact!r}")
    return sorted(ids, key=_natural_key)


# ---------------------------------------------------------------------------
# verification


@dataclass
class CaseReport:
    id: str
    verdict: str
    dimension: int | None
    millis: int
    residual: str | None = None
    details: dict = field(default_factory=dict)
    justification: str = ""

    def as_json(self) -> dict:
        out = {"id": self.id, "verdict": self.verdict, "dimension": self.dimension,
               "millis": self.millis, "residual": self.residual}
        if self.verdict == "Inconclusive":
            out["justification"] = self.justification
        return out


def _fmt_residual(e):
    if e is None:
        return None
    try:
        return format_expr(e)
    except Exception:  # display only
        return str(e)


def verify_instance(inst: Instance, expected_dim: int, gauge: str | None = None,
                    determining: bool = False) -> tuple[str, dict, object]:
    """All checks of one instantiated row; returns (verdict, details, residual)."""
    E = inst.equation
    details: dict = {}
    verdicts = []
    residual = None
    rep = validate(E)
    details["class"] = "ok" if rep.ok else "; ".join(rep.messages)
    if not rep.ok:
        undecided = all("undecided" in m for m in rep.messages)
        verdicts.append("Inconclusive" if undecided else "Fail")
    if gauge:
        gv = gauge_check(E, gauge)
        details["gauge"] = str(gv)
        verdicts.append(verdict_of(gv))
    for i, Q in enumerate(inst.basis, 1):
        r = check_symmetry(E, Q)
        details[f"Q{i}"] = r.verdict
        verdicts.append(r.verdict)
        if r.verdict != "Pass" and residual is None:
            residual = r.residual
    try:
        cl = closure_check(inst.basis, E.relations)
        details["closure"] = cl.verdict
        verdicts.append(cl.verdict)
        if cl.constants is not None:
            details["structure"] = cl.constants.table()
        if cl.failures and residual is None:
            i, j, br = cl.failures[0] if isinstance(cl.failures[0], tuple) else (0, 0, None)
            details["closure_failure"] = f"[Q{i + 1}, Q{j + 1}] = {br}"
    except DecompositionAmbiguous as exc:
        details["closure"] = f"Fail: {exc}"
        verdicts.append("Fail")
    dim_ok = len(inst.basis) == expected_dim
    details["dimension"] = len(inst.basis)
    verdicts.append("Pass" if dim_ok else "Fail")
    kr = check_symmetry(E, DT)
    details["kernel"] = kr.verdict
    verdicts.append(kr.verdict)
    if determining:
        dv = determining_consistency(inst)
        details["determining"] = dv
        verdicts.append(dv)
    return combine(verdicts), details, residual


def determining_consistency(inst: Instance) -> str:
    """Each basis operator zeroes the generated reduced-ansatz system."""
    E = inst.equation
    system = determining_system(E, REDUCED)
    verdicts = []
    for Q in inst.basis:
        for e in bind_field(system.equations, Q, REDUCED):
            verdicts.append(verdict_of(is_zero(e, E.relations, E.chart)))
    return combine(verdicts)


def verify_case(case: ClassificationCase, params: dict | None = None, chart=None,
                determining: bool = False, all_instantiations: bool = True) -> CaseReport:
    """Verify one row at its default (or the given) instantiation.

    With ``all_instantiations`` the extra assignments listed in the file
    (other signs of epsilon, other options of a footnote set) are verified
    too.
    """
    start = time.perf_counter()
    runs = [dict(params or {})]
    if all_instantiations and not params:
        for txt in case.extra_instantiations().values():
            runs.append(_parse_assignments(txt))
    verdicts, details, residual = [], {}, None
    for k, overrides in enumerate(runs):
        inst = case.instantiate(overrides, chart)
        v, d, r = verify_instance(inst, case.dimension, case.gauge, determining)
        verdicts.append(v)
        details["default" if k == 0 else f"alt{k}: {_show(inst.params)}"] = d
        if residual is None and r is not None:
            residual = r
    verdict = combine(verdicts)
    millis = int((time.perf_counter() - start) * 1000)
    return CaseReport(case.id, verdict, case.dimension, millis,
                      _fmt_residual(residual) if verdict != "Pass" else None, details,
                      case.note if verdict == "Inconclusive" else "")


def _parse_assignments(text: str) -> dict:
    out = {}
    for part in _split_top(text):
        k, _, v = part.partition("=")
        out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# transformations between rows


@dataclass
class TransformReport:
    id: str
    verdict: str
    millis: int
    residual: str | None = None
    details: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        return {"id": self.id, "verdict": self.verdict, "millis": self.millis,
                "residual": self.residual, **({"note": self.details["note"]}
                                              if "note" in self.details else {})}


def _endpoints(tr: Transformation, catalog: Catalog):
    src = catalog.case(tr.source).instantiate(tr.source_overrides)
    tgt = catalog.case(tr.target).instantiate(tr.target_overrides)
    return src, tgt


def transformation_map(tr: Transformation, src: Instance) -> PointTransformation:
    m = tr.spec.section("map")
    T, X, U = (src.expr(m[k]) for k in ("T", "X", "U"))
    return PointTransformation.from_map(T, X, U, tr.id)


def _sheet(tr: Transformation, src: Instance) -> dict:
    txt = tr.head.get("sheet")
    if not txt:
        return {}
    out = {}
    for part in _split_top(txt):
        lhs, _, rhs = part.partition("=")
        atom = src.expr(lhs.strip())
        if src.equation.chart == "positive":
            atom = atom.xreplace({SignAtom(x): 1, SignAtom(u): 1})
        out[atom] = sp.Rational(rhs.strip())
    return out


def _twin_checks(tr: Transformation, src: Instance, psi: PointTransformation) -> dict:
    """The bridge x~ = Int(h) followed by an element of the g = h group."""
    out = {}
    E = src.equation
    bridge = tr.head.get("bridge")
    if bridge:
        Xb = src.expr(bridge)
        v = is_zero(sp.diff(Xb, x) - E.h, E.relations, E.chart)
        out["bridge_is_Int_h"] = verdict_of(v)
    ratio = sp.diff(psi.X, x) / E.h
    out["affine_after_bridge"] = verdict_of(is_zero(sp.diff(ratio, x), E.relations, E.chart))
    affine = (sp.diff(psi.T, t, 2) == 0 and sp.diff(psi.U, u, 2) == 0
              and sp.diff(psi.U1, t) == 0 and sp.diff(psi.U1, x) == 0)
    out["scalings"] = "Pass" if affine else "Fail"
    return out


def verify_transformation(tr: Transformation, catalog: Catalog | None = None,
                          transport: bool = True) -> TransformReport:
    """``verify_maps`` on the instantiated endpoints plus basis transport."""
    catalog = catalog or load_catalog()
    start = time.perf_counter()
    details: dict = {}
    if tr.head.get("covered") == "no":
        details["note"] = tr.note
        return TransformReport(tr.id, "NotCovered", 0, None, details)
    if tr.kind == "chain":
        return verify_chain(tr, catalog)
    src, tgt = _endpoints(tr, catalog)
    psi = transformation_map(tr, src)
    rep = verify_maps(psi, src.equation, tgt.equation, src.basis if transport else (),
                      sheet=_sheet(tr, src))
    details["map"] = str(psi)
    details["zero_test"] = rep.details.get("zero_test")
    details["transported"] = [(str(Q), str(Qt), s.verdict) for Q, Qt, s in rep.transported]
    verdicts = [rep.verdict]
    if tr.kind == "twin":
        tw = _twin_checks(tr, src, psi)
        details.update(tw)
        verdicts += list(tw.values())
    if transport and rep.passed and len(rep.transported) != len(src.basis):
        verdicts.append("Fail")
    millis = int((time.perf_counter() - start) * 1000)
    res = rep.residual
    if res is None:
        res = next((s.residual for _, _, s in rep.transported if s.residual is not None), None)
    verdict = combine(verdicts)
    return TransformReport(tr.id, verdict, millis,
                           _fmt_residual(res) if verdict != "Pass" else None, details)


def chain_map(tr: Transformation, catalog: Catalog):
    """Composite map of a chain and its instantiated endpoints."""
    names = tr.steps
    if not names:
        raise ParseError(f"{tr.id}: empty chain", (0, 0))
    psi = None
    for name in names:
        # ~T runs T backwards; T[k=v; ...] sets parameters of both endpoints
        m = re.fullmatch(r"(~?)([^\[\]]+?)\s*(?:\[(.*)\])?", name)
        if not m:
            raise ParseError(f"{tr.id}: bad step {name!r}", (0, 0))
        st = catalog.transformation(m.group(2))
        if st.kind == "chain":
            raise ParseError(f"{tr.id}: nested chains are not supported", (0, 0))
        extra = _parse_assignments(m.group(3).replace(";", ",")) if m.group(3) else {}
        case = catalog.case(st.source)
        src = case.instantiate({**st.source_overrides,
                                **{k: v for k, v in extra.items() if k in case.defaults}})
        phi = transformation_map(st, src)
        if m.group(1):
            phi = invert(phi, src.equation.chart)
        psi = phi if psi is None else compose(phi, psi)
    first = catalog.case(tr.source).instantiate(tr.source_overrides)
    last = catalog.case(tr.target).instantiate(tr.target_overrides)
    return psi, first, last


def verify_chain(tr: Transformation, catalog: Catalog | None = None) -> TransformReport:
    """Compose the listed steps and check the composite end to end."""
    catalog = catalog or load_catalog()
    start = time.perf_counter()
    psi, first, last = chain_map(tr, catalog)
    E = last.equation
    flat = all(is_zero(v - 1, E.relations, E.chart) is Verdict.ZERO for v in (E.f, E.g, E.h))
    rep = verify_maps(psi, first.equation, last.equation)
    details = {"map": str(psi), "target_flat": flat, "steps": tr.steps}
    verdict = combine([rep.verdict, "Pass" if flat else "Fail"])
    millis = int((time.perf_counter() - start) * 1000)
    return TransformReport(tr.id, verdict, millis,
                           _fmt_residual(rep.residual) if verdict != "Pass" else None, details)


# ---------------------------------------------------------------------------
# batch runs


def _verify_one(args):
    root, case_id, determining = args
    cat = load_catalog(root)
    case = cat.case(case_id)
    try:
        return verify_case(case, determining=determining).as_json()
    except DcsymError as exc:
        return {"id": case_id, "verdict": "Fail", "dimension": case.dimension, "millis": 0,
                "residual": None, "error": str(exc)}


@dataclass
class Summary:
    results: list
    millis: int

    @property
    def counts(self) -> dict:
        out: dict = {}
        for r in self.results:
            out[r["verdict"]] = out.get(r["verdict"], 0) + 1
        return out

    @property
    def failed(self) -> bool:
        return any(r["verdict"] == "Fail" for r in self.results)


def verify_all(catalog: Catalog | None = None, *, jobs: int = 1, gauge=None, filter_text=None,
               determining: bool = False, root=None) -> Summary:
    """Verify every selected row; results sorted by case id."""
    root = str(root or case_dir())
    catalog = catalog or load_catalog(root)
    cases = list_cases(catalog, gauge=gauge, filter_text=filter_text)
    start = time.perf_counter()
    work = [(root, c.id, determining) for c in cases]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_verify_one, work))
    else:
        results = [_verify_one(w) for w in work]
    results.sort(key=lambda r: _natural_key(r["id"]))
    return Summary(results, int((time.perf_counter() - start) * 1000))


def summary_lines(summary: Summary) -> list[str]:
    return [json.dumps(r, sort_keys=False) for r in summary.results]


__all__ = [
    "Catalog", "ClassificationCase", "Constraint", "ConstraintViolated", "Instance",
    "Transformation", "CaseReport", "TransformReport", "Summary", "load_catalog", "load_case",
    "list_cases", "verify_case", "verify_all", "verify_transformation", "verify_chain",
    "determining_consistency", "case_dir", "UnknownCase", "BadOverride", "Report",
    "load_equation_file", "load_map_file", "resolve_case_ids",
]
