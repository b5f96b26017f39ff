import random

import pytest
import sympy as sp

from dcsym.catalog import load_catalog
from dcsym.equation import DCEquation
from dcsym.expr import opaque, u, x

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {k}. {title}  {detail}")


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


_F = [opaque("f", x), x**2, sp.exp(x), 1 + x**2, x**sp.Rational(-3, 2)]
_G = [opaque("g", x), sp.S.One, x, sp.exp(-x), 1 + x**4]
_H = [opaque("h", x), sp.S.One, x**3, sp.exp(2 * x), x / (1 + x**2)]
_A = [opaque("A", u), sp.S.One, sp.exp(u), u**sp.Rational(-4, 3), 1 + u**2]
_B = [opaque("B", u), u, sp.exp(3 * u), u**3 + u, sp.log(u)]


def random_equations(n, seed):
    """In-class equations mixing opaque and concrete elements."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        els = [rng.choice(pool) for pool in (_F, _G, _H, _A, _B)]
        out.append(DCEquation(*els))
    return out
