"""Equations of the class f(x) u_t = (g(x) A(u) u_x)_x + h(x) B(u) u_x."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import sympy as sp

from .expr import SideRelation, Verdict, is_zero, t, u, x
from .jet import u_t, u_x, u_xx


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    checks: dict  # name -> Verdict of the *violation* test
    messages: tuple = ()

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class DCEquation:
    """An equation of the class with its arbitrary elements.

    ``relations`` are side relations satisfied by opaque functions the
    elements are written in.  ``chart`` is ``"positive"`` (x, u > 0) or
    ``"signed"``.
    """

    f: sp.Expr
    g: sp.Expr
    h: sp.Expr
    A: sp.Expr
    B: sp.Expr
    relations: tuple[SideRelation, ...] = ()
    chart: str = "positive"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for k in ("f", "g", "h", "A", "B"):
            object.__setattr__(self, k, sp.sympify(getattr(self, k)))
        object.__setattr__(self, "relations", tuple(self.relations))

    @property
    def elements(self) -> dict:
        return {"f": self.f, "g": self.g, "h": self.h, "A": self.A, "B": self.B}

    def with_elements(self, **kw) -> "DCEquation":
        return replace(self, **kw)

    def zero(self, e) -> Verdict:
        return is_zero(e, self.relations, self.chart)

    def __str__(self):
        from .parser import format_expr

        el = ", ".join(f"{k} = {format_expr(v)}" for k, v in self.elements.items())
        return f"DCEquation({el})"


def residual(E: DCEquation) -> sp.Expr:
    """``F = f u_t - g A u_xx - g A_u u_x^2 - g_x A u_x - h B u_x``."""
    A_u = sp.diff(E.A, u)
    g_x = sp.diff(E.g, x)
    return (E.f * u_t - E.g * E.A * u_xx - E.g * A_u * u_x**2
            - g_x * E.A * u_x - E.h * E.B * u_x)


def rhs_solved(E: DCEquation) -> sp.Expr:
    """The right-hand side of the equation solved for ``u_t``."""
    A_u = sp.diff(E.A, u)
    g_x = sp.diff(E.g, x)
    return (E.g * E.A * u_xx + E.g * A_u * u_x**2 + g_x * E.A * u_x
            + E.h * E.B * u_x) / E.f


def validate(E: DCEquation) -> ValidationReport:
    """Check class membership.

    f, g, h, A must be nonzero and (A_u, B_u) must not both vanish.  A check
    passes only on a definite answer; ``Unknown`` is reported, not trusted.
    """
    checks = {}
    msgs = []
    ok = True
    for k, var in (("f", x), ("g", x), ("h", x), ("A", u), ("B", u)):
        e = getattr(E, k)
        bad = e.free_symbols & ({t, x, u} - {var})
        if bad:
            ok = False
            msgs.append(f"{k} depends on {', '.join(sorted(s.name for s in bad))}")
    for k in ("f", "g", "h", "A"):
        v = E.zero(getattr(E, k))
        checks[f"{k} != 0"] = v
        if v is not Verdict.NONZERO:
            ok = False
            msgs.append(f"{k} != 0 is {'violated' if v is Verdict.ZERO else 'undecided'}")
    a_u = E.zero(sp.diff(E.A, u))
    b_u = E.zero(sp.diff(E.B, u))
    checks["A_u != 0"] = a_u
    checks["B_u != 0"] = b_u
    if a_u is Verdict.ZERO and b_u is Verdict.ZERO:
        ok = False
        msgs.append("linear equation: A_u = B_u = 0")
    elif a_u is not Verdict.NONZERO and b_u is not Verdict.NONZERO:
        ok = False
        msgs.append("nonlinearity (A_u, B_u) != (0, 0) is undecided")
    return ValidationReport(ok, checks, tuple(msgs))


def gauge_check(E: DCEquation, gauge: str) -> Verdict:
    """Whether ``E`` is in the gauge ``g=1`` or ``g=h``."""
    if gauge == "g=1":
        return E.zero(E.g - 1)
    if gauge == "g=h":
        return E.zero(E.g - E.h)
    raise ValueError(f"unknown gauge {gauge!r}")
