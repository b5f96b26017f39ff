import pytest
import sympy as sp

from dcsym.expr import opaque, t, u, x
from dcsym.jet import (D, JetOrderOverflow, characteristic, is_jet_symbol, jet, jet_orders,
                       jet_symbols, on_manifold, prolong, total_derivative, u_t, u_x, u_xx)


def test_coordinates():
    assert jet(0, 0) == u
    assert jet(1, 1).name == "u_tx"
    assert jet_orders(jet(2, 1)) == (2, 1)
    assert jet_orders(x) is None
    assert is_jet_symbol(u_xx) and not is_jet_symbol(sp.Symbol("u_xx"))
    assert jet_symbols(u_x * u_t + u) == [u_t, u_x]
    with pytest.raises(JetOrderOverflow):
        jet(3, 3)


def test_total_derivative():
    assert total_derivative(x * u_x**2, x) == u_x**2 + 2 * x * u_x * u_xx
    assert total_derivative(u, t) == u_t
    assert D(u, x, x) == u_xx
    f = opaque("f", x)
    assert total_derivative(f * u, x) == sp.diff(f, x) * u + f * u_x
    with pytest.raises(ValueError):
        total_derivative(u, u)


def test_prolongation_of_scaling():
    # x d_x: eta^x = -u_x, eta^xx = -2 u_xx, nothing in t
    pr = prolong(0, x, 0)
    assert pr.coeffs[u_x] == -u_x
    assert pr.coeffs[u_xx] == -2 * u_xx
    assert pr.coeffs[u_t] == 0


def test_prolongation_of_galilean_boost():
    # 2t d_x - x u d_u for the heat equation
    pr = prolong(0, 2 * t, -x * u)
    assert sp.expand(pr.coeffs[u_t] - (-x * u_t - 2 * u_x)) == 0
    assert sp.expand(pr.coeffs[u_x] - (-u - x * u_x)) == 0
    assert sp.expand(pr.coeffs[u_xx] - (-2 * u_x - x * u_xx)) == 0
    heat = u_t - u_xx
    assert sp.expand(on_manifold(pr.apply(heat), u_xx)) == 0


def test_characteristic():
    assert characteristic(1, x, u) == u - u_t - x * u_x


def test_on_manifold():
    assert on_manifold(jet(1, 1), u_xx) == jet(0, 3)
    assert on_manifold(jet(2, 0), u_xx) == jet(0, 4)
    assert sp.expand(on_manifold(u_t, u * u_x) - u * u_x) == 0
