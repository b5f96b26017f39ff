"""End-to-end acceptance run.

Each criterion records one PASS/FAIL line, printed in the terminal summary.
Run ``python3 tests/test_acceptance.py`` to get the same lines without pytest.
"""

import random
import shutil
import time
from fractions import Fraction

import pytest
import sympy as sp

from dcsym.catalog import (ConstraintViolated, determining_consistency, load_catalog,
                           transformation_map, verify_all, verify_transformation)
from dcsym.equation import residual
from dcsym.expr import Verdict, is_zero, opaque, t, u, x
from dcsym.parser import ParseError
from dcsym.symmetry import (DT, VectorField, check_symmetry, determining_system, implies,
                            impose)
from dcsym.transforms import (EquivTransformation, NotProjectible, PointTransformation,
                              act_equivalence, gauge_factor, verify_maps)

from conftest import ACCEPTANCE, random_equations
from properties import RUNS, SUITES


def record(k, title, ok, detail=""):
    ACCEPTANCE[k] = (ok, title, detail)
    print(f"{'PASS' if ok else 'FAIL'}  {k}. {title}  {detail}")
    return ok


# ---------------------------------------------------------------------------


def test_criterion_1_tables(catalog):
    start = time.perf_counter()
    summary = verify_all(catalog)
    elapsed = time.perf_counter() - start
    bad = [r["id"] for r in summary.results if r["verdict"] != "Pass"]
    ok = not bad and elapsed < 60 and len(summary.results) >= 60
    record(1, "table rows verify", ok,
           f"{len(summary.results)} rows, {summary.counts}, {elapsed:.1f}s, not passing: {bad}")
    assert ok


def test_criterion_2_kernel():
    eqs = random_equations(20, seed=2)
    verdicts = [check_symmetry(E, DT).verdict for E in eqs]
    ok = all(v == "Pass" for v in verdicts)
    record(2, "kernel d_t on random equations", ok, f"{verdicts.count('Pass')}/20")
    assert ok


def _gauge_tuples(n, seed):
    rng = random.Random(seed)
    nonzero = [Fraction(k, d) for k in range(-4, 5) if k for d in (1, 2, 3)]
    out = []
    for _ in range(n):
        e1, e2, e3 = (sp.Rational(*rng.choice(nonzero).as_integer_ratio()) for _ in range(3))
        e4 = sp.Rational(*rng.choice(nonzero + [Fraction(0)]).as_integer_ratio())
        out.append(EquivTransformation(e1=e1, e2=e2, e3=e3, e4=e4))
    return out


def test_criterion_3_gauge_law():
    eqs = random_equations(10, seed=3)
    checks = []
    for phi in _gauge_tuples(10, seed=33):
        for E in eqs:
            image = act_equivalence(phi, E)
            diff = residual(image) - phi.e1 * gauge_factor(phi, E) * residual(E)
            checks.append(is_zero(diff, E.relations, E.chart))
    ok = all(v is Verdict.ZERO for v in checks) and len(checks) == 100
    record(3, "gauge law", ok, f"{sum(v is Verdict.ZERO for v in checks)}/{len(checks)} zero")
    assert ok


def test_criterion_4_additional_equivalences(catalog):
    reports = [verify_transformation(tr, catalog, transport=True)
               for tr in catalog.of_kind("equivalence")]
    bad = [r.id for r in reports if r.verdict != "Pass"]
    transported = sum(len(r.details["transported"]) for r in reports)
    ok = not bad and any(r.id.startswith("X") for r in reports)
    record(4, "additional equivalences with basis transport", ok,
           f"{len(reports)} maps, {transported} transported fields, not passing: {bad}")
    assert ok


def _general_relations():
    E = _opaque_equation()
    S = determining_system(E, "general").equations
    tau, xi, eta = (opaque(n, t, x, u) for n in ("tau", "xi", "eta"))
    found = {
        "tau_x": implies(S, sp.diff(tau, x)),
        "tau_u": implies(S, sp.diff(tau, u)),
    }
    S1 = impose(S, "tau", [x, u])
    found["xi_u"] = implies(S1, sp.diff(xi, u))
    S2 = impose(S1, "xi", [u])
    found["eta_uu"] = implies(S2, sp.diff(eta, u, 2), derive=True,
                              imposed=[("tau", [x, u]), ("xi", [u])])
    return found


def _opaque_equation():
    from dcsym.equation import DCEquation

    return DCEquation(*(opaque(n, x) for n in "fgh"), *(opaque(n, u) for n in "AB"))


def _reduced_relations():
    E = _opaque_equation()
    f, g, h, A, B = E.f, E.g, E.h, E.A, E.B
    S = determining_system(E, "reduced").equations
    tau, xi = opaque("tau", t), opaque("xi", t, x)
    eta = opaque("eta1", t, x) * u + opaque("eta0", t, x)
    d = sp.diff
    first_order = (xi * d(f, x) / f - xi * d(g, x) / g - d(tau, t) + 2 * d(xi, x)
                   - eta * d(A, u) / A)
    linear = d(g * d(eta, x), x) * A + h * d(eta, x) * B - d(eta, t) * f
    return {"classifying": implies(S, first_order), "eta_linear": implies(S, linear)}


def test_criterion_5_determining(catalog):
    found = {**_general_relations(), **_reduced_relations()}
    consistency = {}
    for cid, case in catalog.cases.items():
        consistency[cid] = determining_consistency(case.instantiate())
    bad = [k for k, v in consistency.items() if v != "Pass"]
    ok = all(found.values()) and not bad
    record(5, "determining equations", ok,
           f"relations {found}; consistency {len(consistency) - len(bad)}/{len(consistency)}")
    assert ok


def _power_twin(p, q):
    p, q = sp.Rational(p), sp.Rational(q)
    return {"p": str(p), "q": str(q)}, {"p": str((p - q) / (q + 1)), "q": str(q / (q + 1))}


# bridges checked away from the default instantiation
_TWIN_RUNS = [
    ("W2.2", *_power_twin(5, 1)),
    ("W2.2", *_power_twin("1/2", "3/2")),
    ("W3.2", *_power_twin(5, 1)),
    ("W3.2", *_power_twin("1/2", "3/2")),
    ("W2.6b", {"p": "4"}, {"p": "-1/6"}),
    ("W2.6b", {"p": "4", "epsilon": "-1"}, {"p": "-1/6"}),
    ("W3.12b", {"p": "4"}, {"p": "-1/6"}),
    ("W3.14e", {"mu": "3"}, {"mu": "3"}),
    ("W3.14e", {"mu": "-1/2", "epsilon": "-1"}, {"mu": "-1/2"}),
]


def _twin_parameter_runs(catalog):
    out = []
    for tid, src_over, tgt_over in _TWIN_RUNS:
        tr = catalog.transformation(tid)
        src = catalog.case(tr.source).instantiate({**tr.source_overrides, **src_over})
        tgt = catalog.case(tr.target).instantiate({**tr.target_overrides, **tgt_over})
        psi = transformation_map(tr, src)
        out.append((tid, verify_maps(psi, src.equation, tgt.equation).verdict))
    return out


def test_criterion_6_twins(catalog):
    reports = [verify_transformation(tr, catalog) for tr in catalog.of_kind("twin")]
    passed = [r.id for r in reports if r.verdict == "Pass"]
    uncovered = [r.id for r in reports if r.verdict == "NotCovered"]
    bad = [r.id for r in reports if r.verdict not in ("Pass", "NotCovered")]
    # the primed defaults themselves obey the parameter relations
    rel_ok = True
    for tid in ("W2.2", "W3.2"):
        tr = catalog.transformation(tid)
        s = {k: sp.Rational(v) for k, v in catalog.case(tr.source).defaults.items()}
        d = {k: sp.Rational(v) for k, v in catalog.case(tr.target).defaults.items()}
        rel_ok &= d["p"] == (s["p"] - s["q"]) / (s["q"] + 1) and d["q"] == s["q"] / (s["q"] + 1)
    extra = _twin_parameter_runs(catalog)
    extra_ok = all(v == "Pass" for *_, v in extra)
    ok = not bad and rel_ok and extra_ok and len(passed) >= 40
    record(6, "twin-gauge bridge", ok,
           f"{len(passed)} pass, {len(uncovered)} without closed-form bridge, "
           f"parameter relations {rel_ok and extra_ok}, not passing: {bad}")
    assert ok


def test_criterion_7_chains(catalog):
    reports = [verify_transformation(tr, catalog) for tr in catalog.of_kind("chain")]
    passed = [r for r in reports if r.verdict == "Pass"]
    bad = [r.id for r in reports if r.verdict not in ("Pass", "NotCovered")]
    flat = all(r.details.get("target_flat") for r in passed)
    ok = not bad and flat and len(passed) >= 20
    record(7, "transformation chains to f=g=h=1", ok,
           f"{len(passed)} pass, not passing: {bad}")
    assert ok


# ---------------------------------------------------------------------------
# negative controls


def _perturbed_coefficient(catalog):
    inst = catalog.case("3.16").instantiate()
    Q = inst.basis[-1]
    return check_symmetry(inst.equation, VectorField(Q.tau, Q.xi * 2, Q.eta)).verdict


def _perturbed_element(catalog):
    inst = catalog.case("1.4a").instantiate()
    E = inst.equation.with_elements(B=inst.equation.B + u**2)
    verdicts = {check_symmetry(E, Q).verdict for Q in inst.basis}
    return "Pass" if verdicts == {"Pass"} else "Fail"


def _violated_constraint(catalog):
    try:
        catalog.case("3.14e").instantiate({"mu": "-4/3"})
    except ConstraintViolated:
        return "Rejected"
    return "Pass"


def _non_projectible(catalog):
    try:
        PointTransformation.from_map(t, x + u, u)
    except NotProjectible:
        pass
    else:
        return "Pass"
    src = catalog.case("1.4c").instantiate()
    psi = PointTransformation.unconstrained(t + x, x, u)
    return verify_maps(psi, src.equation, src.equation).verdict


def _wrong_map(catalog):
    tr = catalog.transformation("T2.8")
    src = catalog.case(tr.source).instantiate(tr.source_overrides)
    tgt = catalog.case(tr.target).instantiate(tr.target_overrides)
    psi = transformation_map(tr, src)
    bad = PointTransformation(psi.T, psi.X, psi.U + t)
    return verify_maps(bad, src.equation, tgt.equation).verdict


def _corrupted_file(tmp_path, monkeypatch):
    from dcsym.catalog import case_dir

    root = tmp_path / "cases"
    shutil.copytree(case_dir(), root)
    path = root / "table3" / "3.16.case"
    text = path.read_text()
    path.write_text(text.replace('Q2 = "d_x"', 'Q2 = "2*d_x + d_u"'))
    monkeypatch.setenv("DCSYM_CASE_DIR", str(root))
    cat = load_catalog()
    monkeypatch.delenv("DCSYM_CASE_DIR")
    summary = verify_all(cat, filter_text="table=3,dim=5", root=root)
    return next(r["verdict"] for r in summary.results if r["id"] == "3.16")


def _wrong_dimension(tmp_path):
    from dcsym.catalog import load_case, verify_case

    src = load_catalog().case("2.2")
    path = tmp_path / "dim.case"
    path.write_text(open(src.path).read().replace('dimension = "2"', 'dimension = "3"'))
    try:
        return verify_case(load_case(path)).verdict
    except ParseError:
        return "Rejected"


def test_criterion_8_negative_controls(catalog, tmp_path, monkeypatch):
    results = {
        "perturbed coefficient": _perturbed_coefficient(catalog),
        "perturbed element": _perturbed_element(catalog),
        "violated constraint": _violated_constraint(catalog),
        "non-projectible map": _non_projectible(catalog),
        "wrong map": _wrong_map(catalog),
        "corrupted case file": _corrupted_file(tmp_path, monkeypatch),
        "wrong dimension": _wrong_dimension(tmp_path),
    }
    ok = all(v != "Pass" for v in results.values()) and len(results) >= 5
    record(8, "negative controls never pass", ok,
           ", ".join(f"{k}: {v}" for k, v in results.items()))
    assert ok


def test_criterion_9_property_suites():
    counts = {}
    failures = []
    for name, (fn, key) in SUITES.items():
        before = RUNS[key]
        try:
            fn()
        except Exception as exc:  # reported on the criterion line
            failures.append(f"{name}: {exc!r}"[:200])
        counts[name] = RUNS[key] - before
    ok = not failures and all(n >= 100 for n in counts.values())
    record(9, "core property suites", ok, f"{counts} {failures}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
