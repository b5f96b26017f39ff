import pytest
import sympy as sp

from dcsym.equation import DCEquation, residual
from dcsym.expr import Verdict, integral, is_zero, t, u, x
from dcsym.symmetry import VectorField
from dcsym.transforms import (EquivTransformation, NonInvertibleX, NotLinear, NotProjectible,
                              PointTransformation, act_equivalence, act_point, bridge, compose,
                              equivalence_group_g1, equivalence_group_gh, gauge_factor,
                              invert, is_gauge, pushforward, to_gauge, verify_maps)

BURGERS = DCEquation(1, 1, 1, 1, u)


@pytest.mark.parametrize("T, X, U, err", [
    (t, x + u, u, NotProjectible),
    (t * x, x, u, NotProjectible),
    (t + u, x, u, NotProjectible),
    (t, x, u**2, NotLinear),
])
def test_structure_checks(T, X, U, err):
    with pytest.raises(err):
        PointTransformation.from_map(T, X, U)


def test_invert_and_compose():
    psi = PointTransformation.from_map(2 * t, 3 * x, u + x)
    inv = invert(psi)
    assert (inv.T, inv.X, sp.expand(inv.U)) == (t / 2, x / 3, u - x / 3)
    ident = compose(inv, psi)
    assert (ident.T, ident.X, sp.expand(ident.U)) == (t, x, u)


def test_invert_power_map():
    psi = PointTransformation.from_map(t, x**3, u)
    assert invert(psi, "positive").X == x ** sp.Rational(1, 3)


def test_pushforward():
    psi = PointTransformation.from_map(2 * t, 3 * x, u)
    assert pushforward(psi, VectorField(0, 1, 0)) == VectorField(0, 3, 0)
    assert pushforward(psi, VectorField(t, x, 0)) == VectorField(t, x, 0)


@pytest.mark.parametrize("k", [2, sp.Rational(-1, 3)])
def test_galilean_map(k):
    psi = PointTransformation.from_map(t, x - k * t, u + k)
    basis = [VectorField(1, 0, 0), VectorField(0, t, -1)]
    rep = verify_maps(psi, BURGERS, BURGERS, basis)
    assert rep.verdict == "Pass"
    assert [s.verdict for _, _, s in rep.transported] == ["Pass", "Pass"]


def test_wrong_map_fails():
    psi = PointTransformation.from_map(t, x + 2 * t, u + 2)
    assert verify_maps(psi, BURGERS, BURGERS).verdict == "Fail"


def test_degenerate_map_fails():
    psi = PointTransformation.unconstrained(t, sp.S.One, u)
    rep = verify_maps(psi, BURGERS, BURGERS)
    assert rep.verdict == "Fail" and "X_x" in rep.details["reason"]


def test_act_point_reads_off_elements():
    res = act_point(PointTransformation.from_map(2 * t, x, u), BURGERS)
    assert res.in_class
    E = res.equation
    assert (E.f, E.g, E.h, E.A, E.B) == (2, 1, 1, 1, u)


def test_act_equivalence_by_hand():
    E = DCEquation(x**2, 1, x, sp.exp(u), u)
    img = act_equivalence(EquivTransformation(X=2 * x), E)
    assert (img.f, img.g, img.h) == (x**2 / 8, 2, x / 2)
    img = act_equivalence(EquivTransformation(d3=2, d4=1, e2=3), E)
    assert img.A == 3 * sp.exp((u - 1) / 2)
    assert img.B == (u - 1) / 2


def test_gauge_elements():
    phi = EquivTransformation(e1=2, e4=3)
    assert is_gauge(phi)
    assert not is_gauge(EquivTransformation(d1=2))
    E = DCEquation(x, x, 1, sp.exp(u), u)
    assert gauge_factor(phi, E) == sp.exp(-3 * integral(1 / x))
    diff = residual(act_equivalence(phi, E)) - 2 * gauge_factor(phi, E) * residual(E)
    assert is_zero(diff) is Verdict.ZERO


def test_noninvertible_x():
    with pytest.raises(NonInvertibleX):
        act_equivalence(EquivTransformation(X=sp.S.One), BURGERS)


def test_bridge_and_gauges():
    E = DCEquation(x**2, 1, x, sp.exp(u), sp.exp(3 * u))
    psi = bridge(E)
    assert psi.X == x**2 / 2
    with pytest.raises(ValueError):
        bridge(E, X=x**3)
    psi, img = to_gauge(DCEquation(1, x**2, 1, sp.exp(u), u), "g=1")
    assert psi.X == -1 / x
    assert img.g == 1
    psi, img = to_gauge(DCEquation(1, x, x, sp.exp(u), u), "g=h")
    assert psi.X == x and img.g == img.h


def test_equivalence_group_images_are_verified():
    E1 = DCEquation(x**2, 1, x, sp.exp(u), sp.exp(3 * u))
    psi, img = equivalence_group_g1(E1, d1=2, d3=3, d4=1, d5=2, d7=5, d9=3)
    assert verify_maps(psi, E1, img).verdict == "Pass"
    E0 = DCEquation(x**2, 1, 1, sp.exp(u), u)
    psi, img = equivalence_group_g1(E0, d8=1)
    assert verify_maps(psi, E0, img).verdict == "Pass"
    E2 = DCEquation(x**2, x, x, sp.exp(u), u)
    psi, img = equivalence_group_gh(E2, d1=3, d5=2, d6=1, d7=2, d8=1, d9=4)
    assert verify_maps(psi, E2, img).verdict == "Pass"


DELTAS = [dict(d1=3), dict(d2=1), dict(d3=2), dict(d4=1), dict(d5=2), dict(d6=1), dict(d7=2),
          dict(d8=1), dict(d9=4)]


@pytest.mark.parametrize("kw", DELTAS)
def test_each_group_parameter(kw):
    E1 = DCEquation(x**2, 1, 1, sp.exp(u), sp.exp(3 * u))
    psi, img = equivalence_group_g1(E1, **kw)
    assert verify_maps(psi, E1, img).verdict == "Pass"
    E2 = DCEquation(x**2, x, x, sp.exp(u), u)
    psi, img = equivalence_group_gh(E2, **kw)
    assert verify_maps(psi, E2, img).verdict == "Pass"
