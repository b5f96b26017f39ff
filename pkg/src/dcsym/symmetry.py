"""Point symmetries: invariance test, determining equations and Lie algebras."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef

from .equation import DCEquation, residual, rhs_solved
from .expr import (DcsymError, SideRelation, UnsupportedConstruct, Verdict, is_zero,
                   normalize, opaque, t, u, x)
from .jet import is_jet_symbol, jet_orders, on_manifold, prolong


class DecompositionAmbiguous(DcsymError):
    """The basis is linearly dependent, so coordinates are not unique."""


@dataclass(frozen=True)
class VectorField:
    """``tau d_t + xi d_x + eta d_u``."""

    tau: sp.Expr
    xi: sp.Expr
    eta: sp.Expr

    def __post_init__(self):
        for k in ("tau", "xi", "eta"):
            object.__setattr__(self, k, sp.sympify(getattr(self, k)))

    @classmethod
    def from_text(cls, text, ctx=None) -> "VectorField":
        from .parser import parse_field

        return cls(*parse_field(text, ctx))

    @property
    def components(self):
        return (self.tau, self.xi, self.eta)

    def __call__(self, phi) -> sp.Expr:
        phi = sp.sympify(phi)
        return self.tau * sp.diff(phi, t) + self.xi * sp.diff(phi, x) + self.eta * sp.diff(phi, u)

    def __add__(self, other):
        return VectorField(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return VectorField(*(a - b for a, b in zip(self.components, other.components)))

    def __rmul__(self, c):
        return VectorField(*(c * a for a in self.components))

    def subs(self, mapping) -> "VectorField":
        return VectorField(*(sp.sympify(a).xreplace(mapping) for a in self.components))

    def __str__(self):
        from .parser import format_expr

        parts = []
        for c, d in zip(self.components, ("d_t", "d_x", "d_u")):
            c = sp.sympify(c)
            if c == 0:
                continue
            parts.append(d if c == 1 else f"({format_expr(c)})*{d}")
        return " + ".join(parts) or "0"


DT = VectorField(1, 0, 0)


@dataclass
class Report:
    """Outcome of a verification step."""

    verdict: str  # "Pass" | "Fail" | "Inconclusive"
    residual: sp.Expr | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "Pass"


def verdict_of(v: Verdict) -> str:
    return {Verdict.ZERO: "Pass", Verdict.NONZERO: "Fail"}.get(v, "Inconclusive")


def combine(verdicts) -> str:
    verdicts = list(verdicts)
    if any(v == "Fail" for v in verdicts):
        return "Fail"
    if any(v == "Inconclusive" for v in verdicts):
        return "Inconclusive"
    return "Pass"


def invariance_residual(E: DCEquation, Q: VectorField) -> sp.Expr:
    """``pr Q (F)`` restricted to the solution manifold."""
    pr = prolong(*Q.components)
    R = pr.apply(residual(E))
    return on_manifold(R, rhs_solved(E))


def check_symmetry(E: DCEquation, Q: VectorField) -> Report:
    """Infinitesimal invariance test of ``E`` under ``Q``."""
    try:
        R = invariance_residual(E, Q)
    except UnsupportedConstruct as exc:
        return Report("Inconclusive", None, {"reason": str(exc)})
    v = is_zero(R, E.relations, E.chart)
    res = None
    if v is not Verdict.ZERO:
        try:
            res = normalize(R, E.relations).to_expr()
        except Exception:  # display only
            res = R
    return Report(verdict_of(v), res, {"zero_test": str(v)})


# ---------------------------------------------------------------------------
# determining equations

GENERAL = "general"
REDUCED = "reduced"


def ansatz(kind: str = GENERAL) -> VectorField:
    """Vector field with opaque coefficients.

    The reduced ansatz is ``tau(t) d_t + xi(t,x) d_x + (eta1(t,x) u + eta0(t,x)) d_u``.
    """
    if kind == GENERAL:
        return VectorField(opaque("tau", t, x, u), opaque("xi", t, x, u), opaque("eta", t, x, u))
    if kind == REDUCED:
        return VectorField(opaque("tau", t), opaque("xi", t, x),
                           opaque("eta1", t, x) * u + opaque("eta0", t, x))
    raise ValueError(f"unknown ansatz {kind!r}")


UNKNOWN_FUNCTIONS = ("tau", "xi", "eta", "eta1", "eta0")


@dataclass
class DeterminingSystem:
    equations: list[sp.Expr]
    monomials: list[sp.Expr]
    multiplier: sp.Expr
    ansatz: str


def _split(numer, jet_vars):
    if not jet_vars:
        return [(sp.S.One, numer)]
    poly = sp.Poly(numer, *jet_vars)
    out = []
    for mon, coeff in poly.terms():
        m = sp.Mul(*(v**k for v, k in zip(jet_vars, mon)))
        out.append((m, coeff))
    return out


def determining_system(E: DCEquation, kind: str = GENERAL) -> DeterminingSystem:
    """Split the invariance condition with respect to the jet coordinates.

    The condition is first multiplied by its denominator (a product of
    elements declared nonzero), then split on monomials in u_x, u_xx, ...
    Coefficients are never split with respect to u.
    """
    Q = ansatz(kind)
    R = invariance_residual(E, Q)
    R = sp.together(sp.expand(R))
    numer, denom = sp.fraction(R)
    numer = sp.expand(numer)
    jets = sorted({s for s in numer.free_symbols if is_jet_symbol(s) and s != u},
                  key=lambda s: (sum(jet_orders(s)), s.name))
    eqs, mons = [], []
    for m, c in _split(numer, jets):
        if c != 0:
            eqs.append(c)
            mons.append(m)
    return DeterminingSystem(eqs, mons, denom, kind)


def _unknown_atoms(e):
    out = set()
    for a in sp.sympify(e).atoms(AppliedUndef):
        if a.func.__name__ in UNKNOWN_FUNCTIONS:
            out.add(a)
    return out


def proportional(e, target, relations=(), chart="positive") -> bool:
    """``e = c * target`` with ``c`` a nonzero monomial free of the unknowns."""
    if is_zero(target, relations, chart) is not Verdict.NONZERO:
        return False
    try:
        c = normalize(sp.sympify(e) / sp.sympify(target), relations)
    except Exception:
        return False
    if len(c.branches) != 1:
        return False
    br = c.branches[0]
    if len(br.num) != 1 or len(br.den) != 1:
        return False
    ratio = c.to_expr()
    if _unknown_atoms(ratio) or ratio.has(*_unknown_derivs(ratio)):
        return False
    return not any(is_jet_symbol(s) and s != u for s in ratio.free_symbols)


def _unknown_derivs(e):
    return [d for d in sp.sympify(e).atoms(sp.Derivative)
            if isinstance(d.expr, AppliedUndef) and d.expr.func.__name__ in UNKNOWN_FUNCTIONS]


def implies(system, target, relations=(), chart="positive", derive=False,
            imposed=()) -> bool:
    """Some member of ``system`` is a nonzero monomial multiple of ``target``.

    With ``derive`` the system is first closed under one elimination step:
    ``M - D_u N`` and ``M + D_u N`` for members ``M, N``.  This is the step
    that turns the u_x^2 coefficient into ``eta_uu = 0`` using the u-derivative
    of the first-order classifying equation.  ``imposed`` lists
    ``(name, variables)`` pairs already established (see :func:`impose`) and
    re-applied to the derived candidates.
    """
    if any(proportional(e, target, relations, chart) for e in system):
        return True
    if not derive:
        return False
    for M, N in itertools.permutations(system, 2):
        dN = sp.diff(N, u)
        for cand in (M - dN, M + dN):
            cand = [sp.expand(cand)]
            for name, variables in imposed:
                cand = impose(cand, name, variables)
            if cand and proportional(cand[0], target, relations, chart):
                return True
    return False


def impose(system, name: str, variables) -> list:
    """Impose that every derivative of ``name`` involving ``variables`` vanishes.

    Used to follow the stepwise splitting: once ``tau_x = tau_u = 0`` is
    established, the remaining equations are simplified under it.
    """
    variables = set(variables)
    out = []
    for e in system:
        kill = {d: 0 for d in sp.sympify(e).atoms(sp.Derivative)
                if isinstance(d.expr, AppliedUndef) and d.expr.func.__name__ == name
                and variables & {v for v, _ in d.variable_count}}
        e = sp.expand(sp.sympify(e).xreplace(kill))
        if e != 0:
            out.append(e)
    return out


def bind_field(system_eqs, Q: VectorField, kind: str = REDUCED):
    """Substitute a concrete field into determining equations of the given ansatz."""
    from .expr import substitute

    if kind == REDUCED:
        eta1 = sp.diff(Q.eta, u)
        eta0 = Q.eta.subs(u, 0)
        if sp.diff(Q.eta, u, 2) != 0 or sp.diff(Q.tau, x) != 0 or sp.diff(Q.tau, u) != 0 \
                or sp.diff(Q.xi, u) != 0:
            raise ValueError("field is outside the reduced ansatz")
        b = {"tau": Q.tau, "xi": Q.xi, "eta1": eta1, "eta0": eta0}
    else:
        b = {"tau": Q.tau, "xi": Q.xi, "eta": Q.eta}
    return [substitute(e, b) for e in system_eqs]


# ---------------------------------------------------------------------------
# Lie algebra


def bracket(Q1: VectorField, Q2: VectorField) -> VectorField:
    """``[Q1, Q2] = Q1(coeffs of Q2) - Q2(coeffs of Q1)``."""
    return VectorField(*(sp.expand(Q1(b) - Q2(a))
                         for a, b in zip(Q1.components, Q2.components)))


def _linear_coordinates(target: VectorField, basis, relations=(), chart=(1, 1)):
    """Constant coefficients c with ``target = sum c_k basis_k``.

    Returns the list of solutions found by linear algebra over Q (a set of
    particular solution plus free parameters is reported as ambiguous).
    """
    cs = sp.symbols(f"__c0:{len(basis)}", real=True)
    names = {c.name: c for c in cs}
    eqs = []
    for i in range(3):
        comb = target.components[i] - sum(c * b.components[i] for c, b in zip(cs, basis))
        canon = normalize(comb, relations, chart)
        cidx = [k for k, g in enumerate(canon.gens) if g in names]
        for br in canon.branches:
            groups: dict[tuple, sp.Expr] = {}
            for mon, (p, q) in br.num:
                rest = tuple(k for j, k in enumerate(mon) if j not in cidx)
                term = sp.Rational(p, q)
                for j in cidx:
                    term *= names[canon.gens[j]] ** mon[j]
                groups[rest] = groups.get(rest, 0) + term
            eqs.extend(g for g in groups.values() if g != 0)
    sol = sp.linsolve(eqs, cs)
    return cs, sol


def decompose(target: VectorField, basis, relations=()):
    """Coordinates of ``target`` in ``basis``; ``None`` if outside the span."""
    cs, sol = _linear_coordinates(target, basis, relations)
    if not sol:
        return None
    (vals,) = sol
    if any(v.free_symbols & set(cs) for v in vals):
        raise DecompositionAmbiguous("basis is linearly dependent")
    return [sp.nsimplify(v) for v in vals]


def linearly_independent(basis, relations=()) -> bool:
    zero = VectorField(0, 0, 0)
    cs, sol = _linear_coordinates(zero, basis, relations)
    (vals,) = sol
    return all(v == 0 for v in vals)


@dataclass
class StructureConstants:
    """``[Q_i, Q_j] = sum_k C[i][j][k] Q_k``."""

    C: list

    @property
    def dim(self):
        return len(self.C)

    def jacobi_ok(self) -> bool:
        n = self.dim
        C = self.C
        for i, j, k in itertools.product(range(n), repeat=3):
            for m in range(n):
                s = sum(C[i][j][l] * C[l][k][m] + C[j][k][l] * C[l][i][m]
                        + C[k][i][l] * C[l][j][m] for l in range(n))
                if s != 0:
                    return False
        return True

    def table(self, names=None) -> list[str]:
        n = self.dim
        names = names or [f"Q{i + 1}" for i in range(n)]
        rows = []
        for i in range(n):
            for j in range(i + 1, n):
                text = ""
                for k, c in enumerate(self.C[i][j]):
                    if c == 0:
                        continue
                    mag = "" if abs(c) == 1 else f"{abs(c)}*"
                    sign = ("-" if c < 0 else "") if not text else (" - " if c < 0 else " + ")
                    text += f"{sign}{mag}{names[k]}"
                rows.append(f"[{names[i]}, {names[j]}] = {text or '0'}")
        return rows


@dataclass
class ClosureReport:
    verdict: str
    constants: StructureConstants | None
    failures: list


def closure_check(basis, relations=()) -> ClosureReport:
    """Verify that the span of ``basis`` is closed under the bracket."""
    n = len(basis)
    if n and not linearly_independent(basis, relations):
        raise DecompositionAmbiguous("basis is linearly dependent")
    C = [[[sp.S.Zero] * n for _ in range(n)] for _ in range(n)]
    failures = []
    for i in range(n):
        for j in range(i + 1, n):
            br = bracket(basis[i], basis[j])
            coords = decompose(br, basis, relations)
            if coords is None:
                failures.append((i, j, br))
                continue
            C[i][j] = coords
            C[j][i] = [-c for c in coords]
    if failures:
        return ClosureReport("Fail", None, failures)
    sc = StructureConstants(C)
    if not sc.jacobi_ok():
        return ClosureReport("Fail", sc, ["Jacobi identity"])
    return ClosureReport("Pass", sc, [])


def kernel_check(E: DCEquation, basis=None, relations=()) -> Report:
    """The kernel generator d_t is a symmetry and lies in the span of ``basis``."""
    rep = check_symmetry(E, DT)
    if basis is not None and rep.passed:
        if decompose(DT, basis, relations or E.relations) is None:
            return Report("Fail", None, {"reason": "d_t not in the span of the basis"})
    return rep
