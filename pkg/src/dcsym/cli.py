"""Command-line front end.

Exit codes: 0 pass, 1 fail, 2 usage or input error, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import catalog as cat
from .equation import gauge_check
from .expr import DcsymError
from .parser import format_expr
from .symmetry import (GENERAL, REDUCED, DecompositionAmbiguous, VectorField, bracket,
                       check_symmetry, closure_check, determining_system, verdict_of)
from .transforms import NonInvertible, act_point, verify_maps

EXIT = {"Pass": 0, "Fail": 1, "Inconclusive": 3, "NotCovered": 0}


class UsageError(Exception):
    pass


def _overall(verdicts) -> int:
    codes = [EXIT[v] for v in verdicts]
    if 1 in codes:
        return 1
    return 3 if 3 in codes else 0


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, val = item.partition("=")
        if not sep or not key.strip() or not val.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _emit(obj, as_json: bool, human: str):
    print(json.dumps(obj) if as_json else human, flush=True)


def _case_ids(catalog, args) -> list[str]:
    if args.id:
        catalog.case(args.id)
        return [args.id]
    if args.table is None or args.case is None:
        raise UsageError("give --id, or --table together with --case")
    return cat.resolve_case_ids(catalog, args.table, args.case)


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_case(args) -> int:
    catalog = cat.load_catalog()
    params = _overrides(args.set)
    verdicts = []
    for cid in _case_ids(catalog, args):
        rep = cat.verify_case(catalog.case(cid), params or None, args.chart,
                              determining=args.determining)
        verdicts.append(rep.verdict)
        line = f"{rep.id}: {rep.verdict} (dimension {rep.dimension}, {rep.millis} ms)"
        if rep.residual:
            line += f"\n  residual: {rep.residual}"
        if rep.justification:
            line += f"\n  note: {rep.justification}"
        if args.verbose:
            for run, d in rep.details.items():
                line += f"\n  [{run}] " + ", ".join(f"{k}={v}" for k, v in d.items())
        _emit(rep.as_json(), args.json, line)
    return _overall(verdicts)


def cmd_verify_all(args) -> int:
    summary = cat.verify_all(jobs=args.jobs, gauge=args.gauge, filter_text=args.filter,
                             determining=args.determining)
    for line in cat.summary_lines(summary):
        print(line, flush=True)
    verdicts = [r["verdict"] for r in summary.results]
    if args.transformations:
        catalog = cat.load_catalog()
        for tr in sorted(catalog.transformations.values(),
                         key=lambda tr: cat._natural_key(tr.id)):
            rep = cat.verify_transformation(tr, catalog)
            verdicts.append(rep.verdict)
            print(json.dumps(rep.as_json()), flush=True)
    counts = {}
    for v in verdicts:
        counts[v] = counts.get(v, 0) + 1
    print(json.dumps({"summary": counts, "millis": summary.millis}), file=sys.stderr)
    return _overall(verdicts)


def cmd_check(args) -> int:
    inst = cat.load_equation_file(args.equation, _overrides(args.set), args.chart)
    Q = VectorField.from_text(args.field, inst.ctx)
    Q = VectorField(*(cat.substitute(c, inst.params) for c in Q.components))
    rep = check_symmetry(inst.equation, Q)
    obj = {"field": args.field, "verdict": rep.verdict,
           "residual": None if rep.passed else format_expr(rep.residual)}
    human = f"{args.field}: {rep.verdict}"
    if obj["residual"]:
        human += f"\n  residual: {obj['residual']}"
    _emit(obj, args.json, human)
    return EXIT[rep.verdict]


def cmd_determining(args) -> int:
    inst = cat.load_equation_file(args.equation, _overrides(args.set), args.chart)
    system = determining_system(inst.equation, args.ansatz)
    rows = [(format_expr(m), format_expr(e)) for m, e in zip(system.monomials,
                                                             system.equations)]
    if args.json:
        print(json.dumps({"ansatz": system.ansatz, "multiplier": format_expr(system.multiplier),
                          "equations": [{"monomial": m, "coefficient": e} for m, e in rows]}))
    else:
        print(f"# ansatz {system.ansatz}; condition multiplied by "
              f"{format_expr(system.multiplier)}")
        for m, e in rows:
            print(f"[{m}] {e} = 0")
    return 0


def cmd_transform(args) -> int:
    catalog = cat.load_catalog()
    if args.id:
        rep = cat.verify_transformation(catalog.transformation(args.id), catalog,
                                        transport=not args.no_transport)
        human = f"{rep.id}: {rep.verdict} ({rep.millis} ms)"
        if rep.residual:
            human += f"\n  residual: {rep.residual}"
        _emit(rep.as_json(), args.json, human)
        return EXIT[rep.verdict]
    if not args.map or not args.equation:
        raise UsageError("give --id, or a map file and an equation file")
    src = cat.load_equation_file(args.equation, _overrides(args.set), args.chart)
    psi = cat.load_map_file(args.map, src)
    if args.target:
        tgt = cat.load_equation_file(args.target, _overrides(args.target_set), args.chart)
        rep = verify_maps(psi, src.equation, tgt.equation,
                          () if args.no_transport else src.basis)
        obj = {"map": str(psi), "verdict": rep.verdict,
               "residual": None if rep.passed else format_expr(rep.residual),
               "transported": [[str(Q), str(Qt), s.verdict] for Q, Qt, s in rep.transported]}
        human = f"{psi}: {rep.verdict}"
        if obj["residual"]:
            human += f"\n  residual: {obj['residual']}"
        for Q, Qt, s in rep.transported:
            human += f"\n  {Q} -> {Qt}: {s.verdict}"
        _emit(obj, args.json, human)
        return EXIT[rep.verdict]
    res = act_point(psi, src.equation)
    if res.in_class and res.equation is not None:
        obj = {"map": str(psi), "in_class": True,
               "elements": {k: format_expr(v) for k, v in res.equation.elements.items()}}
        human = f"{psi}:\n  " + "\n  ".join(f"{k} = {v}" for k, v in obj["elements"].items())
    else:
        obj = {"map": str(psi), "in_class": False, "note": res.note,
               "residual": format_expr(res.residual)}
        human = f"{psi}: image not read off in the class ({res.note})\n  {obj['residual']}"
    _emit(obj, args.json, human)
    return 0


def cmd_bracket(args) -> int:
    if args.fields:
        if len(args.fields) != 2:
            raise UsageError("bracket takes exactly two fields")
        Q1, Q2 = (VectorField.from_text(f) for f in args.fields)
        br = bracket(Q1, Q2)
        _emit({"bracket": str(br)}, args.json, f"[{args.fields[0]}, {args.fields[1]}] = {br}")
        return 0
    catalog = cat.load_catalog()
    code = 0
    for cid in _case_ids(catalog, args):
        inst = catalog.case(cid).instantiate(_overrides(args.set), args.chart)
        try:
            cl = closure_check(inst.basis, inst.equation.relations)
        except DecompositionAmbiguous as exc:
            _emit({"id": cid, "verdict": "Fail", "error": str(exc)}, args.json,
                  f"{cid}: {exc}")
            code = 1
            continue
        rows = cl.constants.table() if cl.constants is not None else []
        _emit({"id": cid, "verdict": cl.verdict, "structure": rows}, args.json,
              "\n".join([f"{cid}: {cl.verdict}"] + [f"  {r}" for r in rows]))
        code = max(code, EXIT[cl.verdict])
    return code


def cmd_gauge(args) -> int:
    if args.equation:
        inst = cat.load_equation_file(args.equation, _overrides(args.set), args.chart)
        items = [(args.equation, inst, args.gauge or "g=1")]
    else:
        catalog = cat.load_catalog()
        items = []
        for cid in _case_ids(catalog, args):
            case = catalog.case(cid)
            items.append((cid, case.instantiate(_overrides(args.set), args.chart),
                          args.gauge or case.gauge))
    verdicts = []
    for name, inst, gauge in items:
        v = verdict_of(gauge_check(inst.equation, gauge))
        verdicts.append(v)
        _emit({"id": name, "gauge": gauge, "verdict": v}, args.json, f"{name}: {gauge} {v}")
    return _overall(verdicts)


def cmd_list(args) -> int:
    for c in cat.list_cases(gauge=args.gauge, filter_text=args.filter):
        _emit({"id": c.id, "table": c.table, "gauge": c.gauge, "dimension": c.dimension},
              args.json, f"{c.id}\t{c.gauge}\tdim {c.dimension}")
    return 0


# ---------------------------------------------------------------------------


def _case_selector(p):
    p.add_argument("--table", help="table number, e.g. 3 or 2'")
    p.add_argument("--case", help="case label within the table, e.g. 14e or 15")
    p.add_argument("--id", help="full case id, e.g. 3.14e")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--chart", choices=("positive", "signed"), default=None,
                        help="sign chart for x and u (default: the case's own)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="parameter or element override; repeatable")

    ap = argparse.ArgumentParser(prog="dcsym", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-case", parents=[common], help="verify catalog rows")
    _case_selector(p)
    p.add_argument("--determining", action="store_true",
                   help="also substitute the basis into the generated determining system")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_verify_case)

    p = sub.add_parser("verify-all", help="verify the whole catalog (JSON lines)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--gauge", choices=("g=1", "g=h"))
    p.add_argument("--filter", help="e.g. dim>=4,table=3")
    p.add_argument("--determining", action="store_true")
    p.add_argument("--transformations", action="store_true",
                   help="also verify transformations, twin bridges and chains")
    p.set_defaults(func=cmd_verify_all)

    p = sub.add_parser("check", parents=[common], help="check one field against an equation")
    p.add_argument("equation", help="equation file")
    p.add_argument("field", help="vector field, e.g. '2*t*d_t + x*d_x'")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("determining", parents=[common], help="print determining equations")
    p.add_argument("equation")
    p.add_argument("--ansatz", choices=(GENERAL, REDUCED), default=GENERAL)
    p.set_defaults(func=cmd_determining)

    p = sub.add_parser("transform", parents=[common], help="apply or verify a point map")
    p.add_argument("map", nargs="?", help="file with a [map] section")
    p.add_argument("equation", nargs="?")
    p.add_argument("target", nargs="?")
    p.add_argument("--id", help="verify a catalog transformation instead")
    p.add_argument("--target-set", action="append", metavar="KEY=VALUE")
    p.add_argument("--no-transport", action="store_true")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("bracket", parents=[common], help="structure constants of a basis")
    _case_selector(p)
    p.add_argument("--fields", nargs="+", help="bracket two explicit fields instead")
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("gauge", parents=[common], help="check the gauge of an equation")
    _case_selector(p)
    p.add_argument("--equation")
    p.add_argument("--gauge", choices=("g=1", "g=h"))
    p.set_defaults(func=cmd_gauge)

    p = sub.add_parser("list", parents=[common], help="list catalog rows")
    p.add_argument("--gauge", choices=("g=1", "g=h"))
    p.add_argument("--filter")
    p.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except NonInvertible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (UsageError, DcsymError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
