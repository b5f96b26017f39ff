"""Jet coordinates, total derivatives and prolongation of point symmetries."""

from __future__ import annotations

import re
from dataclasses import dataclass

import sympy as sp

from .expr import DcsymError, t, u, x

JET_ORDER_CAP = 5

_JET_NAME = re.compile(r"^u_(t*)(x*)$")
_CACHE: dict[tuple[int, int], sp.Symbol] = {(0, 0): u}


class JetOrderOverflow(DcsymError):
    """A total derivative asked for a jet coordinate beyond the cap."""


def jet(i: int, j: int) -> sp.Symbol:
    """The coordinate ``d^(i+j) u / dt^i dx^j``."""
    if i + j > JET_ORDER_CAP:
        raise JetOrderOverflow(f"jet order {i + j} exceeds the cap {JET_ORDER_CAP}")
    sym = _CACHE.get((i, j))
    if sym is None:
        sym = _CACHE[(i, j)] = sp.Symbol("u_" + "t" * i + "x" * j, real=True)
    return sym


u_t, u_x = jet(1, 0), jet(0, 1)
u_tt, u_tx, u_xx = jet(2, 0), jet(1, 1), jet(0, 2)


def jet_orders(s: sp.Symbol) -> tuple[int, int] | None:
    if s == u:
        return (0, 0)
    m = _JET_NAME.match(s.name) if s.is_Symbol else None
    if m is None or s.name == "u_":
        return None
    return len(m.group(1)), len(m.group(2))


def is_jet_symbol(s) -> bool:
    return s.is_Symbol and jet_orders(s) is not None and s.is_real


def jet_symbols(e) -> list[sp.Symbol]:
    """Jet coordinates of positive order occurring in ``e``, sorted."""
    out = [s for s in sp.sympify(e).free_symbols if is_jet_symbol(s) and s != u]
    return sorted(out, key=lambda s: (sum(jet_orders(s)), s.name))


def total_derivative(e, var: sp.Symbol) -> sp.Expr:
    """``D_t`` or ``D_x`` of an expression on the jet space."""
    if var not in (t, x):
        raise ValueError("total derivatives are taken in t or x")
    e = sp.sympify(e)
    step = (1, 0) if var == t else (0, 1)
    out = sp.diff(e, var)
    syms = [s for s in e.free_symbols if is_jet_symbol(s)]
    for s in syms:
        i, j = jet_orders(s)
        out += jet(i + step[0], j + step[1]) * sp.diff(e, s)
    return out


def D(e, *vars_) -> sp.Expr:
    for v in vars_:
        e = total_derivative(e, v)
    return e


@dataclass(frozen=True)
class Prolongation:
    """Coefficients of the second prolongation of ``tau d_t + xi d_x + eta d_u``."""

    tau: sp.Expr
    xi: sp.Expr
    eta: sp.Expr
    coeffs: dict

    def apply(self, F) -> sp.Expr:
        F = sp.sympify(F)
        out = self.tau * sp.diff(F, t) + self.xi * sp.diff(F, x) + self.eta * sp.diff(F, u)
        for s, c in self.coeffs.items():
            dF = sp.diff(F, s)
            if dF != 0:
                out += c * dF
        return out


def characteristic(tau, xi, eta) -> sp.Expr:
    return eta - tau * u_t - xi * u_x


def prolong(tau, xi, eta, order: int = 2) -> Prolongation:
    """Prolongation via ``eta^J = D_J(Q) + tau u_{J,t} + xi u_{J,x}``."""
    Q = characteristic(tau, xi, eta)
    coeffs = {}
    for n in range(1, order + 1):
        for i in range(n + 1):
            j = n - i
            d = Q
            for _ in range(i):
                d = total_derivative(d, t)
            for _ in range(j):
                d = total_derivative(d, x)
            coeffs[jet(i, j)] = sp.expand(d + tau * jet(i + 1, j) + xi * jet(i, j + 1))
    return Prolongation(sp.sympify(tau), sp.sympify(xi), sp.sympify(eta), coeffs)


def on_manifold(e, rhs) -> sp.Expr:
    """Eliminate every t-derivative of u using ``u_t = rhs`` and its consequences."""
    e = sp.sympify(e)
    images: dict[sp.Symbol, sp.Expr] = {}

    def image(i, j):
        key = jet(i, j)
        if key not in images:
            val = rhs
            for _ in range(i - 1):
                val = eliminate(total_derivative(val, t))
            for _ in range(j):
                val = total_derivative(val, x)
            images[key] = eliminate(val)
        return images[key]

    def eliminate(expr):
        for _ in range(2 * JET_ORDER_CAP + 2):
            todo = [s for s in expr.free_symbols if is_jet_symbol(s) and jet_orders(s)[0] > 0]
            if not todo:
                return expr
            expr = expr.xreplace({s: image(*jet_orders(s)) for s in todo})
        raise JetOrderOverflow("elimination of t-derivatives did not terminate")

    return eliminate(e)
