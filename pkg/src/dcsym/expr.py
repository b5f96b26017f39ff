"""Expression core.

Expressions are sympy trees over the independent variables ``t, x`` and the
dependent variable ``u``, real parameters, opaque (arbitrary) functions,
antiderivative atoms and sign atoms.  The canonicaliser maps an expression
to a pair of polynomials over a set of algebraically independent atoms, which
is what makes the zero test sound: a ``Zero`` verdict is only ever returned
when the canonical numerator vanishes identically.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from math import lcm
from typing import Iterable, Mapping

import sympy as sp
from sympy.core.function import AppliedUndef

t = sp.Symbol("t", real=True)
x = sp.Symbol("x", real=True)
u = sp.Symbol("u", real=True)
BASE_VARS = (t, x, u)

# Positive stand-ins used while canonicalising on a chart.
_xp = sp.Symbol("x", positive=True)
_up = sp.Symbol("u", positive=True)

MAX_REWRITE_DEPTH = 64


class DcsymError(Exception):
    """Base class for all library errors."""


class UnsupportedConstruct(DcsymError):
    """The expression leaves the supported fragment."""


class IncompleteBinding(DcsymError):
    """A binding does not cover every derivative atom it needs to replace."""


class NonTerminating(DcsymError):
    """Side-relation rewriting did not reach a fixpoint."""


class Verdict(enum.Enum):
    ZERO = "Zero"
    NONZERO = "NonZero"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


_PARAMS: dict[str, sp.Symbol] = {}


def param(name: str) -> sp.Symbol:
    """Return the (real) parameter symbol called ``name``."""
    sym = _PARAMS.get(name)
    if sym is None:
        sym = _PARAMS[name] = sp.Symbol(name, real=True)
    return sym


def opaque(name: str, *args: sp.Expr) -> sp.Expr:
    """An arbitrary function ``name`` applied to ``args``."""
    return sp.Function(name, real=True)(*args)


def _known_positive(e) -> bool:
    # exponentials of the real quantities used here are positive
    if isinstance(e, sp.exp):
        return True
    return bool(e.is_extended_positive)


class SignAtom(sp.Function):
    """Sign of a quantity that is constant on a chart.

    Its derivative is zero and it squares to one.  Factors of known sign are
    pulled out on construction, so ``sign(exp(t)*ln(x))`` becomes
    ``sign(ln(x))``.
    """

    nargs = 1
    is_real = True

    @classmethod
    def eval(cls, arg):
        if _known_positive(arg):
            return sp.S.One
        if arg.is_extended_negative:
            return sp.S.NegativeOne
        if isinstance(arg, SignAtom):
            return arg
        if arg.is_Pow and arg.exp.is_integer:
            return sp.S.One if arg.exp.is_even else cls(arg.base)
        if arg.is_Mul:
            known = sp.S.One
            rest = []
            for a in arg.args:
                if _known_positive(a):
                    continue
                if a.is_extended_negative:
                    known = -known
                elif a.is_Pow and a.exp.is_integer:
                    if a.exp.is_odd:
                        rest.append(a.base)
                else:
                    rest.append(a)
            if known != 1 or len(rest) != len(arg.args):
                return known * cls(sp.Mul(*rest))
        if arg.could_extract_minus_sign():
            return -cls(-arg)
        return None

    def fdiff(self, argindex=1):
        return sp.S.Zero

    def _eval_power(self, e):
        if e.is_Integer:
            return sp.S.One if e.is_even else self
        return None

    def _eval_is_zero(self):
        return False


class Antiderivative(sp.Function):
    """``Int(e)``: a fixed antiderivative of ``e`` with respect to ``var``.

    Only its derivative is known.  Two atoms are the same atom when their
    integrands are structurally equal after light canonicalisation.
    """

    nargs = 2
    is_real = True

    def _eval_derivative(self, s):
        integrand, var = self.args
        if s == var:
            return integrand
        d = sp.diff(integrand, s)
        return sp.S.Zero if d == 0 else Antiderivative(d, var)

    def _eval_subs(self, old, new):
        if old == self.args[1] and not new.is_Symbol:
            raise UnsupportedConstruct(
                "antiderivative composed with a non-identity change of variable")
        return None


def integral(e, var: sp.Symbol = x) -> sp.Expr:
    """The antiderivative atom of ``e`` in ``var``."""
    e = sp.cancel(sp.together(sp.expand(sp.sympify(e))))
    if e == 0:
        return sp.S.Zero
    return Antiderivative(e, var)


def abs_(e) -> sp.Expr:
    """``|e|`` written as ``e*sign(e)`` so it stays differentiable."""
    e = sp.sympify(e)
    return e * SignAtom(e)


def sign(e) -> sp.Expr:
    return SignAtom(sp.sympify(e))


# ---------------------------------------------------------------------------
# side relations


@dataclass(frozen=True)
class SideRelation:
    """``d^order F/dvar^order = rhs`` for an opaque function ``F(var)``."""

    func: str
    var: sp.Symbol
    order: int
    rhs: sp.Expr

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("side relations must target a derivative")

    @property
    def target(self) -> sp.Expr:
        return sp.Derivative(opaque(self.func, self.var), (self.var, self.order))


def _derivative_key(d):
    """(name, var, order) for a derivative of a univariate opaque function."""
    if isinstance(d, sp.Derivative) and isinstance(d.expr, AppliedUndef):
        f = d.expr
        if len(f.args) == 1 and f.args[0].is_Symbol:
            var = f.args[0]
            if all(v == var for v, _ in d.variable_count):
                return f.func.__name__, var, int(d.derivative_count)
    return None


def reduce_mod(e, relations: Iterable[SideRelation]) -> sp.Expr:
    """Rewrite every derivative at or above a relation's target order."""
    rels = {r.func: r for r in relations}
    e = sp.sympify(e)
    if not rels:
        return e
    images: dict[tuple[str, int], sp.Expr] = {}

    def image(name, n, depth):
        key = (name, n)
        if key in images:
            return images[key]
        if depth > MAX_REWRITE_DEPTH:
            raise NonTerminating(f"side relation for {name} does not terminate")
        r = rels[name]
        if n == r.order:
            val = r.rhs
        else:
            val = sp.diff(image(name, n - 1, depth + 1), r.var)
        val = rewrite(val, depth + 1)
        images[key] = val
        return val

    def rewrite(expr, depth):
        for _ in range(MAX_REWRITE_DEPTH):
            repl = {}
            for d in expr.atoms(sp.Derivative):
                k = _derivative_key(d)
                if k is None:
                    continue
                name, var, n = k
                r = rels.get(name)
                if r is not None and var == r.var and n >= r.order:
                    repl[d] = image(name, n, depth + 1)
            if not repl:
                return expr
            expr = expr.xreplace(repl)
        raise NonTerminating("side-relation rewriting did not reach a fixpoint")

    return rewrite(e, 0)


# ---------------------------------------------------------------------------
# canonical form

_ALLOWED = (sp.Add, sp.Mul, sp.Pow, sp.exp, sp.log, SignAtom)


@dataclass
class _AtomTable:
    exprs: dict[str, sp.Expr] = field(default_factory=dict)
    dependent: set[str] = field(default_factory=set)
    by_expr: dict[sp.Expr, sp.Symbol] = field(default_factory=dict)

    def symbol(self, key_expr: sp.Expr, positive: bool = False, dependent: bool = False):
        sym = self.by_expr.get(key_expr)
        if sym is None:
            name = "[" + sp.sstr(key_expr, order="lex") + "]"
            sym = sp.Symbol(name, positive=True) if positive else sp.Symbol(name, real=True)
            self.by_expr[key_expr] = sym
            self.exprs[name] = key_expr
            if dependent:
                self.dependent.add(name)
        return sym


def _opaque_placeholders(e, table: _AtomTable):
    """Replace opaque atoms by placeholder symbols, rejecting unsupported nodes."""

    def walk(node):
        if isinstance(node, (AppliedUndef, sp.Derivative, sp.Subs)):
            return table.symbol(node)
        if isinstance(node, Antiderivative):
            integrand = node.args[0]
            elementary = not integrand.atoms(AppliedUndef)
            return table.symbol(node, dependent=elementary)
        if isinstance(node, sp.Abs):
            a = walk(node.args[0])
            return a * SignAtom(a)
        if isinstance(node, sp.sign):
            return SignAtom(walk(node.args[0]))
        if node.is_Symbol or node.is_Rational:
            return node
        if node is sp.E:
            return sp.exp(1)
        if node.is_Number:
            if node.is_Float:
                return sp.nsimplify(node, rational=True)
            raise UnsupportedConstruct(f"unsupported number {node}")
        if isinstance(node, _ALLOWED):
            return node.func(*[walk(a) for a in node.args])
        raise UnsupportedConstruct(f"unsupported construct {type(node).__name__}: {node}")

    return walk(e)


def _split_exp_log(e):
    """``exp(k*log(b)) -> b**k`` and ``exp(a+b) -> exp(a)*exp(b)``."""

    def walk(node):
        if not node.args:
            return node
        node = node.func(*[walk(a) for a in node.args])
        if isinstance(node, sp.log) and isinstance(node.args[0], sp.exp):
            # every quantity in the fragment is real
            return node.args[0].args[0]
        if isinstance(node, sp.exp):
            out = sp.S.One
            for term in sp.Add.make_args(sp.expand(node.args[0])):
                logs = [f for f in sp.Mul.make_args(term) if isinstance(f, sp.log)]
                if len(logs) == 1:
                    out *= logs[0].args[0] ** sp.cancel(term / logs[0])
                else:
                    out *= sp.exp(term)
            return out
        return node

    return walk(e)


def _atomize(e, table: _AtomTable):
    """Turn powers with non-integer exponents, exponentials and logs into atoms.

    Exponents are split into rational multiples of monomials; every
    ``(base, monomial)`` pair gets one atom standing for
    ``base**(monomial/L)`` where ``L`` is the lcm of the denominators seen,
    so the remaining exponents are integers.
    """
    # bare symbols raised to rational powers: substitute a root symbol
    roots: dict[sp.Symbol, int] = {}
    for p in e.atoms(sp.Pow):
        if p.base.is_Symbol and p.exp.is_Rational and not p.exp.is_Integer:
            roots[p.base] = lcm(roots.get(p.base, 1), int(p.exp.q))
    if roots:
        sub = {}
        for b, L in roots.items():
            if b.is_positive:
                sub[b] = table.symbol(b ** sp.Rational(1, L), positive=True) ** L
        if sub:
            e = e.xreplace(sub)
            e = sp.expand(e, power_exp=True, power_base=True, mul=True, log=False)

    dens: dict[tuple, int] = {}

    def exponent_terms(ex):
        for term in sp.Add.make_args(sp.expand(ex)):
            c, m = term.as_coeff_Mul(rational=True)
            yield c, m

    def collect(node):
        for a in node.args:
            collect(a)
        if node is sp.E:
            dens.setdefault(("exp", sp.S.One), 1)
        elif isinstance(node, sp.exp):
            for c, m in exponent_terms(node.args[0]):
                k = ("exp", m)
                dens[k] = lcm(dens.get(k, 1), int(c.q))
        elif node.is_Pow and not node.exp.is_Integer:
            for c, m in exponent_terms(node.exp):
                k = (node.base, m)
                dens[k] = lcm(dens.get(k, 1), int(c.q))

    collect(e)

    def atom_for(key, c):
        base, m = key
        L = dens[key]
        if base == "exp":
            sym = table.symbol(sp.exp(m / L), positive=True)
        else:
            positive = bool(base.is_positive)
            # a root of a composite, or of an atom that may be negative,
            # is algebraically tied to the base
            dependent = not base.is_Symbol or (m == 1 and not positive)
            sym = table.symbol(base ** (m / L), positive=positive, dependent=dependent)
        n = c * L
        if not n.is_Integer:
            raise UnsupportedConstruct("exponent normalisation failed")
        return sym ** int(n)

    def rebuild(node):
        if node is sp.E:
            return atom_for(("exp", sp.S.One), sp.S.One)
        if not node.args:
            return node
        if isinstance(node, sp.exp):
            out = sp.S.One
            for c, m in exponent_terms(node.args[0]):
                out *= atom_for(("exp", m), c)
            return out
        if node.is_Pow and not node.exp.is_Integer:
            base = node.base
            out = sp.S.One
            for c, m in exponent_terms(node.exp):
                out *= atom_for((base, m), c)
            return out
        if isinstance(node, sp.log):
            arg = rebuild(node.args[0])
            if arg.is_Number and arg.is_negative:
                raise UnsupportedConstruct("logarithm of a negative number")
            # a root substitution may have turned the argument into a power
            if arg.is_Pow and arg.base.is_Symbol and arg.base.is_positive and arg.exp.is_Integer:
                return arg.exp * table.symbol(sp.log(arg.base), dependent=False)
            return table.symbol(sp.log(arg), dependent=not arg.is_Symbol)
        return node.func(*[rebuild(a) for a in node.args])

    return rebuild(e)


@dataclass(frozen=True)
class Canonical:
    """One sign branch of a canonical form: reduced numerator over monic denominator."""

    signs: tuple
    num: tuple
    den: tuple


@dataclass(frozen=True, eq=False)
class CanonicalExpr:
    """Canonical form of an expression on one chart.

    ``branches`` holds one reduced fraction per assignment of the sign atoms.
    Equality is structural over ``gens`` and ``branches``.
    """

    gens: tuple[str, ...]
    branches: tuple[Canonical, ...]
    sign_atoms: tuple[sp.Expr, ...] = ()
    atoms: Mapping[str, sp.Expr] = field(default_factory=dict)
    dependent: frozenset = frozenset()

    def __eq__(self, other):
        if not isinstance(other, CanonicalExpr):
            return NotImplemented
        return self.gens == other.gens and self.branches == other.branches

    def __hash__(self):
        return hash((self.gens, self.branches))

    @property
    def is_zero(self) -> bool:
        return all(not b.num for b in self.branches)

    @property
    def numerator_gens(self) -> set[str]:
        used = set()
        for b in self.branches:
            for mon, _ in b.num:
                used.update(g for g, k in zip(self.gens, mon) if k)
        return used

    def _poly(self, terms):
        out = sp.S.Zero
        for mon, (p, q) in terms:
            m = sp.Rational(p, q)
            for g, k in zip(self.gens, mon):
                if k:
                    m *= self.atoms[g] ** k
            out += m
        return out

    def to_expr(self) -> sp.Expr:
        total = sp.S.Zero
        for br in self.branches:
            val = self._poly(br.num) / self._poly(br.den)
            weight = sp.S.One
            for s, v in zip(self.sign_atoms, br.signs):
                weight *= (1 + v * s) / 2
            total += weight * val
        return total

    def __str__(self) -> str:
        from .parser import format_expr

        return format_expr(self.to_expr())


def _chart_map(chart_signs):
    sx, su = chart_signs
    return {x: sx * _xp, u: su * _up}


class _NotRational(Exception):
    pass


def _to_field(e, K, gens):
    if e.is_Symbol:
        return gens[e]
    if e.is_Rational:
        return K(e)
    if e.is_Add:
        out = K(0)
        for a in e.args:
            out += _to_field(a, K, gens)
        return out
    if e.is_Mul:
        out = K(1)
        for a in e.args:
            out *= _to_field(a, K, gens)
        return out
    if e.is_Pow and e.exp.is_Integer:
        return _to_field(e.base, K, gens) ** int(e.exp)
    raise _NotRational(e)


def _fraction(e):
    """``e`` as a reduced fraction with monic denominator.

    Arithmetic runs in a rational function field over QQ; expressions
    outside that fragment fall back to ``cancel``.
    """
    syms = sorted(e.free_symbols, key=lambda s: s.name)
    if syms:
        gens = sp.symbols(f"_g0:{len(syms)}")
        K = sp.polys.fields.FracField(gens, sp.QQ, sp.polys.orderings.lex)
        try:
            q = _to_field(e, K, dict(zip(syms, K.gens)))
        except _NotRational:
            pass
        else:
            num, den = q.numer, q.denom
            lc = den.LC
            num, den = (num.quo_ground(lc), den.quo_ground(lc)) if lc != 1 else (num, den)
            return syms, _ring_expr(num, syms), _ring_expr(den, syms)
    return _fraction_slow(e)


def _ring_expr(p, syms):
    return sp.Add(*[sp.Rational(c) * sp.Mul(*[s ** k for s, k in zip(syms, m)])
                    for m, c in p.terms()])


def _fraction_slow(e):
    e = sp.cancel(sp.together(e))
    num, den = sp.fraction(e)
    syms = sorted(e.free_symbols, key=lambda s: s.name)
    if syms:
        pd = sp.Poly(den, *syms, domain="QQ")
        lc = pd.LC()
    else:
        lc = sp.Rational(den)
    if lc != 1:
        num = sp.expand(num / lc)
        den = sp.expand(den / lc)
    return syms, num, den


def _terms(expr, syms, gen_names):
    if syms:
        try:
            items = sp.Poly(expr, *syms, domain="QQ").terms()
        except (sp.PolynomialError, sp.CoercionFailed) as exc:
            raise UnsupportedConstruct(f"non-rational coefficient in {expr}") from exc
    elif expr.is_Rational:
        items = [((), expr)]
    else:
        raise UnsupportedConstruct(f"non-rational constant {expr}")
    idx = [gen_names.index(s.name) for s in syms]
    out = []
    for mon, c in items:
        if c == 0:
            continue
        full = [0] * len(gen_names)
        for i, k in zip(idx, mon):
            full[i] = int(k)
        c = sp.Rational(c)
        out.append((tuple(full), (int(c.p), int(c.q))))
    return tuple(sorted(out))


def _is_even_power(node):
    return (node.is_Pow and node.exp.is_Rational and not node.exp.is_Integer
            and node.base.is_Pow and node.base.exp.is_even)


def _even_roots(e):
    """``(a**(2k))**r -> |a|**(2k*r)`` for real ``a``."""
    return e.replace(_is_even_power,
                     lambda n: sp.Abs(n.base.base) ** (n.base.exp * n.exp))


def normalize(e, relations: Iterable[SideRelation] = (), chart=(1, 1)) -> CanonicalExpr:
    """Canonical form of ``e`` modulo ``relations`` on the given chart.

    ``chart`` gives the signs of ``x`` and ``u``.
    """
    e = sp.sympify(e)
    e = reduce_mod(e, relations)
    e = _even_roots(e)
    table = _AtomTable()
    e = _opaque_placeholders(e, table)
    e = e.xreplace(_chart_map(chart))
    e = _split_exp_log(e)
    e = sp.expand(e, deep=True, mul=True, multinomial=True, power_exp=True,
                  power_base=True, log=True)
    e = _split_exp_log(e)
    signs = sorted(e.atoms(SignAtom), key=sp.default_sort_key)
    assignments = list(itertools.product((1, -1), repeat=len(signs)))
    results = []
    for assignment in assignments:
        eb = e.xreplace(dict(zip(signs, assignment))) if signs else e
        eb = _atomize(eb, table)
        results.append((assignment, _fraction(eb)))
    all_syms = {s.name: s for _, (syms, _, _) in results for s in syms}
    gen_names = sorted(all_syms)
    branches = tuple(
        Canonical(tuple(a), _terms(num, syms, gen_names), _terms(den, syms, gen_names))
        for a, (syms, num, den) in results)
    atoms = {}
    for name, sym in all_syms.items():
        atoms[name] = _restore(_unplace(table.exprs.get(name, sym), table), chart)
    signs = tuple(_restore(s, chart) for s in signs)
    return CanonicalExpr(tuple(gen_names), branches, signs, atoms,
                         frozenset(table.dependent))


def _unplace(v, table):
    """Undo placeholders nested inside an atom's own expression."""
    for _ in range(MAX_REWRITE_DEPTH):
        inner = {s: table.exprs[s.name] for s in v.free_symbols if s.name in table.exprs
                 and table.exprs[s.name] != s}
        if not inner:
            return v
        v = v.xreplace(inner)
    raise NonTerminating("nested placeholders")


def _restore(v, chart):
    return v.xreplace({_xp: chart[0] * x, _up: chart[1] * u})


CHARTS = {
    "positive": ((1, 1),),
    "signed": ((1, 1), (-1, 1), (1, -1), (-1, -1)),
}


def is_zero(e, relations: Iterable[SideRelation] = (), chart: str = "positive") -> Verdict:
    """Tri-state zero test.

    ``Zero`` only when the canonical numerator vanishes on every chart
    branch.  ``NonZero`` only when a surviving monomial involves nothing but
    algebraically independent atoms.  Everything else is ``Unknown``.
    """
    relations = tuple(relations)
    nonzero_seen = False
    for signs in CHARTS[chart]:
        try:
            c = normalize(e, relations, signs)
        except (UnsupportedConstruct, NonTerminating, sp.PolynomialError):
            return Verdict.UNKNOWN
        if c.is_zero:
            continue
        if c.numerator_gens & c.dependent:
            return Verdict.UNKNOWN
        nonzero_seen = True
    return Verdict.NONZERO if nonzero_seen else Verdict.ZERO


def simplify(e, relations: Iterable[SideRelation] = (), chart=(1, 1)) -> sp.Expr:
    """Round trip through the canonical form (for display)."""
    try:
        return sp.powsimp(normalize(e, relations, chart).to_expr())
    except (UnsupportedConstruct, sp.PolynomialError):
        return sp.sympify(e)


def diff(e, var: sp.Symbol) -> sp.Expr:
    return sp.diff(sp.sympify(e), var)


def substitute(e, bindings: Mapping) -> sp.Expr:
    """Substitute symbols and opaque functions.

    A key may be a symbol, or the name of an opaque function.  A function
    binding is either an expression in the function's own arguments, whose
    derivatives are then computed, or an explicit mapping from derivative
    orders (tuples of variables, ``()`` for the function itself) to images.
    """
    e = sp.sympify(e)
    sym_map = {}
    fn_map = {}
    for k, v in bindings.items():
        if isinstance(k, str):
            fn_map[k] = v
        else:
            sym_map[k] = sp.sympify(v)
    if fn_map:
        repl = {}
        for a in e.atoms(sp.Derivative) | e.atoms(AppliedUndef):
            if isinstance(a, sp.Derivative):
                f = a.expr
                if not isinstance(f, AppliedUndef):
                    continue
                orders = tuple(v for v, n in a.variable_count for _ in range(int(n)))
            else:
                f, orders = a, ()
            name = f.func.__name__
            if name not in fn_map:
                continue
            val = fn_map[name]
            if isinstance(val, Mapping):
                if orders not in val:
                    raise IncompleteBinding(
                        f"binding for {name} has no image for derivative {orders}")
                repl[a] = sp.sympify(val[orders])
            else:
                img = sp.sympify(val)
                for v in orders:
                    img = sp.diff(img, v)
                repl[a] = img
        # replace derivatives before the bare applications they contain
        e = e.xreplace({k: v for k, v in repl.items() if isinstance(k, sp.Derivative)})
        e = e.xreplace({k: v for k, v in repl.items() if not isinstance(k, sp.Derivative)})
    if sym_map:
        e = e.xreplace(sym_map)
    return e


def free_parameters(e) -> set[sp.Symbol]:
    """Symbols of ``e`` other than the base variables and jet coordinates."""
    from .jet import is_jet_symbol

    return {s for s in sp.sympify(e).free_symbols
            if s not in BASE_VARS and not is_jet_symbol(s)}
