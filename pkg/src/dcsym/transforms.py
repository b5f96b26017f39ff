"""Equivalence and point transformations of the class.

A point transformation maps ``(t, x, u)`` to ``(T, X, U)``.  Admissible
transformations are projectible (``T = T(t)``, ``X = X(t, x)``) and affine
in ``u``.  Maps are checked without inverting them: the target equation is
pulled back along the jet prolongation of the map and must vanish on the
solutions of the source equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef

from .equation import DCEquation, residual, rhs_solved, validate
from .expr import (DcsymError, SideRelation, SignAtom, UnsupportedConstruct, Verdict,
                   _even_roots, integral, is_zero, normalize, t, u, x)
from .jet import D, on_manifold, u_t, u_x, u_xx
from .symmetry import Report, VectorField, check_symmetry, combine, verdict_of


class NotProjectible(DcsymError):
    """T depends on x or u, or X depends on u."""


class NotLinear(DcsymError):
    """U is not affine in u."""


class NonInvertible(DcsymError):
    """No closed-form inverse could be found or confirmed."""


class NonInvertibleX(NonInvertible):
    """The x-change of an equivalence transformation has no closed-form inverse."""


# tilde coordinates used while inverting
_tt = sp.Symbol("t~", real=True, nonzero=True)
_xt = sp.Symbol("x~", real=True)
_ut = sp.Symbol("u~", real=True)


@dataclass(frozen=True)
class PointTransformation:
    """``t~ = T, x~ = X, u~ = U``.

    Use :meth:`from_map` for admissible maps (structure is validated) and
    :meth:`unconstrained` for arbitrary maps, e.g. negative controls.
    """

    T: sp.Expr
    X: sp.Expr
    U: sp.Expr
    checked: bool = True
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for k in ("T", "X", "U"):
            object.__setattr__(self, k, sp.sympify(getattr(self, k)))

    @classmethod
    def from_map(cls, T, X, U, name="") -> "PointTransformation":
        psi = cls(T, X, U, True, name)
        problems = psi.structure_problems()
        for kind, msg in problems:
            raise kind(msg)
        return psi

    @classmethod
    def unconstrained(cls, T, X, U, name="") -> "PointTransformation":
        return cls(T, X, U, False, name)

    @classmethod
    def identity(cls) -> "PointTransformation":
        return cls(t, x, u)

    def structure_problems(self):
        out = []
        for var in (x, u):
            if sp.diff(self.T, var) != 0:
                out.append((NotProjectible, f"T depends on {var}"))
        if sp.diff(self.X, u) != 0:
            out.append((NotProjectible, "X depends on u"))
        if sp.simplify(sp.diff(self.U, u, 2)) != 0:
            out.append((NotLinear, "U is not affine in u"))
        return out

    @property
    def U1(self):
        return sp.diff(self.U, u)

    @property
    def U0(self):
        return sp.expand(self.U - self.U1 * u)

    def witnesses(self):
        """Expressions that must be nonzero for the map to be invertible."""
        return {"T_t": sp.diff(self.T, t), "X_x": sp.diff(self.X, x), "U_u": self.U1}

    def __str__(self):
        from .parser import format_expr

        return f"t~ = {format_expr(self.T)}, x~ = {format_expr(self.X)}, u~ = {format_expr(self.U)}"


def jet_images(psi: PointTransformation):
    """First and second derivatives of u~ in terms of the source jet.

    Solves the chain rule with the full Jacobian, so it also covers maps
    that are not projectible.
    """
    DtT, DxT = D(psi.T, t), D(psi.T, x)
    DtX, DxX = D(psi.X, t), D(psi.X, x)
    DtU, DxU = D(psi.U, t), D(psi.U, x)
    det = DtT * DxX - DtX * DxT
    if det == 0:
        raise NonInvertible("the map has a degenerate Jacobian")
    ut = (DtU * DxX - DxU * DtX) / det
    ux = (DxU * DtT - DtU * DxT) / det
    Dt_ux, Dx_ux = D(ux, t), D(ux, x)
    uxx = (Dx_ux * DtT - Dt_ux * DxT) / det
    return ut, ux, uxx


def pullback_residual(E: DCEquation, psi: PointTransformation) -> sp.Expr:
    """Residual of ``E`` (written in the image coordinates) in source coordinates."""
    ut, ux, uxx = jet_images(psi)
    F = residual(E)
    mapping = {t: psi.T, x: psi.X, u: psi.U, u_t: ut, u_x: ux, u_xx: uxx}
    return F.subs(mapping, simultaneous=True)


@dataclass
class MapReport(Report):
    transported: list = field(default_factory=list)


def _merge_relations(*groups):
    seen = {}
    for g in groups:
        for r in g:
            seen.setdefault(r.func, r)
    return tuple(seen.values())


def on_sheet(e, sheet):
    """Fix the signs listed in ``sheet`` (sign atom -> +-1)."""
    if not sheet:
        return sp.sympify(e)
    repl = dict(sheet)
    for atom, v in sheet.items():
        repl[sp.Abs(atom.args[0])] = v * atom.args[0]
    return _even_roots(sp.sympify(e)).xreplace(repl)


def verify_maps(psi: PointTransformation, E1: DCEquation, E2: DCEquation,
                basis=(), sheet=None) -> MapReport:
    """Does ``psi`` map solutions of ``E1`` to solutions of ``E2``?

    Optionally transports each field of ``basis`` and checks it is a
    symmetry of ``E2``.  ``sheet`` fixes signs of composite quantities
    such as ``sign(ln|x|)`` where the map is only valid on one side.
    """
    psi = _on_chart(psi, E1.chart)
    if sheet:
        psi = PointTransformation(on_sheet(psi.T, sheet), on_sheet(psi.X, sheet),
                                  on_sheet(psi.U, sheet), psi.checked, psi.name)
    relations = _merge_relations(E1.relations, E2.relations)
    details = {}
    if not psi.checked:
        details["structure"] = [m for _, m in psi.structure_problems()]
    for name, w in psi.witnesses().items():
        v = is_zero(w, relations, E1.chart)
        details[name] = str(v)
        if v is Verdict.ZERO:
            return MapReport("Fail", w, {**details, "reason": f"{name} vanishes"})
    try:
        R = on_manifold(pullback_residual(E2, psi), rhs_solved(E1))
        R = on_sheet(R, sheet)
        v = is_zero(R, relations, E1.chart)
    except (UnsupportedConstruct, NonInvertible) as exc:
        return MapReport("Inconclusive", None, {**details, "reason": str(exc)})
    res = None
    if v is not Verdict.ZERO:
        try:
            res = normalize(R, relations).to_expr()
        except Exception:  # display only
            res = R
    rep = MapReport(verdict_of(v), res, {**details, "zero_test": str(v)})
    if basis and rep.passed:
        for Q in basis:
            try:
                Qt = pushforward(psi, Q, E1.chart)
                sub = check_symmetry(E2, Qt)
            except (NonInvertible, UnsupportedConstruct) as exc:
                sub = Report("Inconclusive", None, {"reason": str(exc)})
                Qt = None
            rep.transported.append((Q, Qt, sub))
        rep.verdict = combine([rep.verdict] + [s.verdict for _, _, s in rep.transported])
    return rep


# ---------------------------------------------------------------------------
# composition and inversion


def compose(second: PointTransformation, first: PointTransformation) -> PointTransformation:
    """``second`` after ``first``."""
    m = {t: first.T, x: first.X, u: first.U}
    T, X, U = (e.subs(m, simultaneous=True) for e in (second.T, second.X, second.U))
    cls = PointTransformation
    return cls(T, X, U, first.checked and second.checked,
               f"{second.name} o {first.name}".strip(" o"))


def _chart_constants(e, table):
    """Replace sign atoms by nonzero sign symbols while solving."""
    repl = {}
    for s in sp.sympify(e).atoms(SignAtom):
        if s not in table:
            table[s] = sp.Symbol(f"sigma{len(table) + 1}", nonzero=True, real=True)
        repl[s] = table[s]
    return sp.sympify(e).xreplace(repl)


def _restore_signs(e, table, back):
    """Sign of a base variable follows the inverse map; others mark a sheet."""
    repl = {}
    for atom, sym in table.items():
        arg = atom.args[0]
        if arg.is_Symbol:
            repl[sym] = SignAtom(back[arg])
        else:
            repl[sym] = SignAtom(sym)
    return sp.sympify(e).xreplace(repl)


def _tidy(e):
    e = sp.sympify(e)
    e = e.replace(lambda n: isinstance(n, sp.log) and isinstance(n.args[0], sp.exp),
                  lambda n: n.args[0].args[0])
    e = sp.expand_log(e)
    e = sp.powdenest(e)
    return sp.expand(e, power_base=True, power_exp=True)


def _solve_for(expr, var, target, check_vars=()):
    """Solve ``expr == target`` for ``var``; accept only a verified candidate."""
    try:
        sols = sp.solve(sp.Eq(expr, target), var, dict=False)
    except (NotImplementedError, ValueError) as exc:
        raise NonInvertible(str(exc)) from exc
    for s in sols:
        if s.has(sp.I) or s.has(sp.LambertW):
            continue
        back = expr.subs(var, s)
        if is_zero(back - target) is Verdict.ZERO:
            return s
    raise NonInvertible(f"cannot invert {expr} for {var}")


def _positive_if(e, sym):
    probe = e.xreplace({x: sp.Symbol("x", positive=True), u: sp.Symbol("u", positive=True)})
    return sp.Symbol(sym.name, positive=True) if probe.is_positive else sym


def _on_chart(psi, chart):
    if chart != "positive":
        return psi
    fix = {SignAtom(x): 1, SignAtom(u): 1}
    return PointTransformation(*(e.xreplace(fix) for e in (psi.T, psi.X, psi.U)),
                               psi.checked, psi.name)


def invert(psi: PointTransformation, chart: str = "signed") -> PointTransformation:
    """Closed-form inverse of a projectible map, confirmed by round trip.

    On the positive chart the signs of x and u are fixed first.  Remaining
    sign atoms become free sign constants in the inverse; each choice of
    signs gives one sheet.
    """
    psi = _on_chart(psi, chart)
    table: dict = {}
    T = _chart_constants(psi.T, table)
    X = _chart_constants(psi.X, table)
    U = _chart_constants(psi.U, table)
    tt = _positive_if(T, _tt)
    t_inv = _solve_for(T, t, tt)
    Xs = X.subs(t, t_inv)
    xt = _positive_if(X, _xt)
    x_inv = _solve_for(Xs, x, xt)
    U1 = sp.diff(U, u)
    U0 = sp.expand(U - U1 * u)
    back = {t: t_inv, x: x_inv}
    u_inv = (_ut - U0.subs(back, simultaneous=True)) / U1.subs(back, simultaneous=True)
    rename = {tt: t, xt: x, _ut: u}
    back = {t: t_inv, x: x_inv, u: u_inv}
    out = [_restore_signs(_tidy(e), table, back).xreplace(rename) for e in (t_inv, x_inv, u_inv)]
    return PointTransformation(*out, psi.checked, f"{psi.name}^-1" if psi.name else "")


def pushforward(psi: PointTransformation, Q: VectorField,
                chart: str = "signed") -> VectorField:
    """The field ``Q`` written in the image coordinates."""
    psi = _on_chart(psi, chart)
    comps = [Q(psi.T), Q(psi.X), Q(psi.U)]
    inv = invert(psi)
    m = {t: inv.T, x: inv.X, u: inv.U}
    comps = [sp.sympify(c).subs(m, simultaneous=True) for c in comps]
    return VectorField(*(_tidy(c) for c in comps))


# ---------------------------------------------------------------------------
# equivalence group


@dataclass(frozen=True)
class EquivTransformation:
    """An element of the extended equivalence group.

    ``t~ = d1 t + d2``, ``x~ = X(x)``, ``u~ = d3 u + d4`` and
    ``f~ = e1 d1 phi f / X_x``, ``g~ = e1/e2 X_x phi g``, ``h~ = e1/e3 phi h``,
    ``A~ = e2 A``, ``B~ = e3 (B + e4 A)`` with ``phi = exp(-e4 Int(h/g))``.
    ``e4 = 0`` gives the usual equivalence group.
    """

    d1: sp.Expr = 1
    d2: sp.Expr = 0
    d3: sp.Expr = 1
    d4: sp.Expr = 0
    e1: sp.Expr = 1
    e2: sp.Expr = 1
    e3: sp.Expr = 1
    e4: sp.Expr = 0
    X: sp.Expr = x

    def __post_init__(self):
        for k in ("d1", "d2", "d3", "d4", "e1", "e2", "e3", "e4", "X"):
            object.__setattr__(self, k, sp.sympify(getattr(self, k)))

    def as_point(self) -> PointTransformation:
        return PointTransformation(self.d1 * t + self.d2, self.X, self.d3 * u + self.d4)

    def nondegenerate(self) -> bool:
        return all(sp.sympify(v) != 0 for v in (self.d1, self.d3, self.e1, self.e2, self.e3)) \
            and sp.diff(self.X, x) != 0


def is_gauge(phi: EquivTransformation) -> bool:
    """Gauge elements leave t, x and u untouched."""
    return (phi.d1 == 1 and phi.d2 == 0 and phi.d3 == 1 and phi.d4 == 0
            and sp.expand(phi.X - x) == 0)


def gauge_factor(phi: EquivTransformation, E: DCEquation) -> sp.Expr:
    if phi.e4 == 0:
        return sp.S.One
    return sp.exp(-phi.e4 * integral(E.h / E.g, x))


def act_equivalence(phi: EquivTransformation, E: DCEquation) -> DCEquation:
    """Image of ``E``; the new elements are written in the new variables."""
    X_x = sp.diff(phi.X, x)
    if X_x == 0:
        raise NonInvertibleX("X_x vanishes")
    g_factor = gauge_factor(phi, E)
    f = phi.e1 * phi.d1 * g_factor * E.f / X_x
    g = phi.e1 / phi.e2 * X_x * g_factor * E.g
    h = phi.e1 / phi.e3 * g_factor * E.h
    A = phi.e2 * E.A
    B = phi.e3 * (E.B + phi.e4 * E.A)
    if phi.d3 != 1 or phi.d4 != 0:
        back_u = (u - phi.d4) / phi.d3
        A = A.subs(u, back_u)
        B = B.subs(u, back_u)
    if sp.expand(phi.X - x) != 0:
        try:
            x_inv = _solve_for(phi.X, x, _xt)
        except NonInvertible as exc:
            raise NonInvertibleX(str(exc)) from exc
        x_inv = x_inv.xreplace({_xt: x})
        try:
            f, g, h = (e.subs(x, x_inv) for e in (f, g, h))
        except UnsupportedConstruct as exc:
            raise NonInvertibleX(str(exc)) from exc
    return DCEquation(f, g, h, A, B, E.relations if sp.expand(phi.X - x) == 0 else (),
                      E.chart, E.name)


# ---------------------------------------------------------------------------
# acting with point maps and reading off the class shape


@dataclass
class ActResult:
    residual: sp.Expr
    equation: DCEquation | None
    in_class: bool
    note: str = ""


def act_point(psi: PointTransformation, E: DCEquation) -> ActResult:
    """Transform ``E`` by ``psi`` and try to read off the new elements.

    The elements are extracted in the gauge ``g~ = 1`` when the transformed
    equation allows it; otherwise only the residual is reported.
    """
    inv = invert(psi)
    R = sp.expand(pullback_residual(E, inv))
    try:
        eq = extract_class(R, E.relations, E.chart)
    except UnsupportedConstruct as exc:
        return ActResult(R, None, False, str(exc))
    if eq is None:
        return ActResult(R, None, False, "not in the class shape with g = 1")
    return ActResult(R, eq, True)


def _separate(e):
    """``e = P(x) * Q(u)``; returns ``(P, Q)`` or ``None``."""
    e = sp.sympify(e)
    if e == 0:
        return sp.S.Zero, sp.S.One
    d = sp.separatevars(sp.powsimp(e), symbols=[x, u], dict=True, force=True)
    if not d:
        return None
    P = d.get(x, sp.S.One) * d.get("coeff", sp.S.One)
    Qu = d.get(u, sp.S.One)
    return P, Qu


def extract_class(R, relations=(), chart="positive"):
    """Read ``(f, 1, h, A, B)`` off a residual, or ``None``."""
    R = sp.expand(R)
    a = R.coeff(u_t)
    b = -R.coeff(u_xx)
    c = -R.coeff(u_x, 2)
    rest = sp.expand(R - a * u_t + b * u_xx + c * u_x**2)
    d = -rest.coeff(u_x)
    rest = sp.expand(rest + d * u_x)
    if rest != 0 and is_zero(rest, relations, chart) is not Verdict.ZERO:
        return None
    bn, cn, dn = (sp.simplify(sp.powsimp(v / a)) for v in (b, c, d))
    if any(sp.diff(v, t) != 0 and is_zero(sp.diff(v, t), relations, chart) is not Verdict.ZERO
           for v in (bn, cn, dn)):
        return None
    sep = _separate(bn)
    if sep is None:
        return None
    K, A = sep
    if is_zero(cn - K * sp.diff(A, u), relations, chart) is not Verdict.ZERO:
        return None
    f = 1 / K
    hb = _separate(sp.simplify(dn / K))
    if hb is None:
        return None
    h, B = hb
    if B == 0 or h == 0:
        h, B = sp.S.One, sp.S.Zero
    return DCEquation(sp.simplify(f), 1, h, A, B, tuple(relations), chart)


# ---------------------------------------------------------------------------
# gauges


def gauge_map(E: DCEquation, gauge: str):
    """Point map taking ``E`` to the requested gauge.

    ``g=1`` uses ``x~ = Int(1/g)``, ``g=h`` uses ``x~ = Int(h/g)``.  The
    antiderivative is taken in closed form when sympy finds one (and its
    derivative checks out); otherwise the map is reported as not closed form.
    """
    integrand = 1 / E.g if gauge == "g=1" else E.h / E.g
    if gauge not in ("g=1", "g=h"):
        raise ValueError(f"unknown gauge {gauge!r}")
    if is_zero(integrand - 1, E.relations, E.chart) is Verdict.ZERO:
        return PointTransformation.identity()
    X = closed_antiderivative(integrand)
    if X is None:
        raise NonInvertibleX(f"no closed-form antiderivative of {integrand}")
    return PointTransformation.from_map(t, X, u)


def closed_antiderivative(e):
    """A closed-form antiderivative in x, verified by differentiation."""
    e = sp.sympify(e)
    if e.atoms(AppliedUndef):
        return None
    xp = sp.Symbol("x", positive=True)
    try:
        F = sp.integrate(e.xreplace({x: xp}), xp)
    except Exception:
        return None
    if F.has(sp.Integral):
        return None
    F = F.xreplace({xp: x})
    if is_zero(sp.diff(F, x) - e) is not Verdict.ZERO:
        return None
    return F


def to_gauge(E: DCEquation, gauge: str):
    """``(map, transformed equation)`` for the gauge ``g=1`` or ``g=h``."""
    psi = gauge_map(E, gauge)
    if psi.X == x:
        return psi, E
    phi = EquivTransformation(X=psi.X)
    return psi, act_equivalence(phi, E)


def bridge(E: DCEquation, X=None):
    """The twin-gauge bridge ``t~ = t, x~ = Int(h), u~ = u`` from g = 1 to g = h.

    ``X`` may supply the antiderivative; it is checked against ``h``.
    """
    if is_zero(E.g - 1, E.relations, E.chart) is not Verdict.ZERO:
        raise ValueError("the bridge starts from the gauge g = 1")
    if X is None:
        X = closed_antiderivative(E.h)
        if X is None:
            raise NonInvertibleX("no closed-form antiderivative of h")
    if is_zero(sp.diff(X, x) - E.h, E.relations, E.chart) is not Verdict.ZERO:
        raise ValueError("X is not an antiderivative of h")
    return PointTransformation.from_map(t, X, u)


def equivalence_group_g1(E: DCEquation, d1=1, d2=0, d3=1, d4=0, d5=1, d6=0, d7=1, d8=0, d9=1):
    """Image of ``E`` (with g = 1) under the gauge-preserving group of g = 1.

    Returns ``(map, image)``; the map needs a closed form for
    ``Int(exp(d8 Int(h)))`` unless ``d8 = 0``.
    """
    h = E.h
    inner = closed_antiderivative(h) if d8 != 0 else sp.S.Zero
    if inner is None:
        raise NonInvertibleX("no closed-form antiderivative of h")
    w = sp.exp(d8 * inner)
    outer = closed_antiderivative(w) if d8 != 0 else x
    if outer is None:
        raise NonInvertibleX("no closed-form antiderivative of exp(d8 Int(h))")
    X = d5 * outer + d6
    f = sp.Rational(1) * d1 / d5 * d9 * E.f * sp.exp(-2 * d8 * inner)
    hh = sp.sympify(d9) / d7 * h * sp.exp(-d8 * inner)
    A = d5 * d9 * E.A
    B = d7 * (E.B + d8 * E.A)
    psi = PointTransformation.from_map(d1 * t + d2, X, d3 * u + d4)
    img = DCEquation(f, 1, hh, A, B, (), E.chart)
    # elements are still written in the old x; move them to x~
    if sp.expand(X - x) != 0:
        x_inv = _solve_for(X, x, _xt).xreplace({_xt: x})
        img = img.with_elements(f=img.f.subs(x, x_inv), h=img.h.subs(x, x_inv))
    if d3 != 1 or d4 != 0:
        back = (u - d4) / d3
        img = img.with_elements(A=img.A.subs(u, back), B=img.B.subs(u, back))
    return psi, img


def equivalence_group_gh(E: DCEquation, d1=1, d2=0, d3=1, d4=0, d5=1, d6=0, d7=1, d8=0, d9=1):
    """Image of ``E`` (with g = h) under the gauge-preserving group of g = h.

    ``A`` picks up ``d5 d7``: scaling ``h`` by ``1/d7`` and ``B`` by ``d7``
    leaves ``(h A u_x)_x`` unbalanced otherwise.
    """
    X = d5 * x + d6
    f = sp.sympify(d1) / d5 * d9 * E.f * sp.exp(d8 * x)
    hh = sp.sympify(d9) / d7 * E.h * sp.exp(d8 * x)
    A = d5 * d7 * E.A
    B = d7 * (E.B - d8 * E.A)
    psi = PointTransformation.from_map(d1 * t + d2, X, d3 * u + d4)
    x_inv = (x - d6) / d5
    img = DCEquation(f.subs(x, x_inv), hh.subs(x, x_inv), hh.subs(x, x_inv), A, B, (), E.chart)
    if d3 != 1 or d4 != 0:
        back = (u - d4) / d3
        img = img.with_elements(A=img.A.subs(u, back), B=img.B.subs(u, back))
    return psi, img


__all__ = [
    "PointTransformation", "EquivTransformation", "verify_maps", "act_equivalence",
    "act_point", "pushforward", "compose", "invert", "is_gauge", "bridge", "to_gauge",
    "gauge_map", "equivalence_group_g1", "equivalence_group_gh", "NotProjectible",
    "NotLinear", "NonInvertible", "NonInvertibleX", "extract_class", "pullback_residual",
    "validate", "SideRelation",
]
