"""Text syntax for expressions and vector fields, plus the printer.

Grammar (lowest to highest binding)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := number | name | name '(' args ')' | '(' expr ')'

Juxtaposition is not multiplication.  ``^`` binds tighter than unary minus,
so ``-x^2`` is ``-(x^2)``.  Built-in functions are ``exp``, ``ln`` (alias
``log``), ``abs``, ``sign``, ``sqrt`` and ``Int`` (antiderivative in x).
A declared opaque function ``f`` of ``x`` is written ``f`` and its
derivatives ``f_x``, ``f_xx``; ``tau_tx`` for a function of several
variables.  The field atoms ``d_t``, ``d_x``, ``d_u`` are only accepted by
:func:`parse_field`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef

from .expr import (Antiderivative, DcsymError, SignAtom, abs_, integral, opaque,
                   param, t, u, x)

VARS = {"t": t, "x": x, "u": u}
BUILTINS = ("exp", "ln", "log", "abs", "sign", "sqrt", "Int")
FIELD_ATOMS = ("d_t", "d_x", "d_u")


class ParseError(DcsymError):
    """Syntax or binding error with the offending character span."""

    def __init__(self, message: str, span: tuple[int, int], expected=()):
        self.span = span
        self.expected = tuple(expected)
        detail = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at {span[0]}..{span[1]}{detail}")


@dataclass
class ParseContext:
    """Names an expression may refer to.

    ``functions`` maps an opaque function name to its argument variables.
    With ``auto_params`` unknown identifiers become parameters; otherwise
    they are errors.
    """

    params: set[str] = field(default_factory=set)
    functions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    auto_params: bool = True

    def function(self, name):
        return opaque(name, *(VARS[v] for v in self.functions[name]))


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.group(0).strip() == "":
            break
        if m.group(1):
            out.append(("num", m.group(1), m.start(1), m.end(1)))
        elif m.group(2):
            out.append(("name", m.group(2), m.start(2), m.end(2)))
        else:
            ch = m.group(3)
            if ch not in "+-*/^(),":
                raise ParseError(f"unexpected character {ch!r}", (m.start(3), m.end(3)))
            out.append(("op", ch, m.start(3), m.end(3)))
        pos = m.end()
    out.append(("end", "", len(text), len(text)))
    return out


class _Parser:
    def __init__(self, text, ctx, allow_fields=False):
        self.text = text
        self.ctx = ctx
        self.allow_fields = allow_fields
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] == "name":
            raise ParseError(f"unexpected {tok[1] or 'end of input'!r}",
                             (tok[2], tok[3]), (repr(value),))
        return tok

    def parse_all(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", (tok[2], tok[3]),
                             ("operator", "end of input"))
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()
            rhs = self.unary()
            if op[1] == "/":
                if rhs == 0:
                    raise ParseError("division by zero", (op[2], op[3]))
                e = e / rhs
            else:
                e = e * rhs
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            e = self.unary()
            return -e if tok[1] == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return base ** self.unary()
        return base

    def atom(self):
        tok = self.take()
        kind, val, a, b = tok
        if kind == "num":
            return sp.Rational(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(val, (a, b))
            return self.name(val, (a, b))
        expected = ("number", "name", "'('")
        raise ParseError(f"unexpected {val or 'end of input'!r}", (a, b), expected)

    def args(self):
        self.expect("(")
        out = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            out.append(self.expr())
        self.expect(")")
        return out

    def call(self, name, span):
        args = self.args()
        if name in BUILTINS:
            if len(args) != 1:
                raise ParseError(f"{name} takes one argument", span)
            a = args[0]
            if name == "exp":
                return sp.exp(a)
            if name in ("ln", "log"):
                return sp.log(a)
            if name == "abs":
                return abs_(a)
            if name == "sign":
                return SignAtom(a)
            if name == "sqrt":
                return a ** sp.Rational(1, 2)
            return integral(a, x)
        if name in self.ctx.functions:
            nvars = len(self.ctx.functions[name])
            if len(args) != nvars:
                raise ParseError(f"{name} takes {nvars} argument(s)", span)
            return opaque(name, *args)
        raise ParseError(f"unknown function {name!r}", span, ("declared function",))

    def name(self, name, span):
        if name in FIELD_ATOMS:
            if not self.allow_fields:
                raise ParseError(f"{name} is only allowed in a vector field", span)
            return sp.Symbol(name)
        if name in VARS:
            return VARS[name]
        if name in self.ctx.functions:
            return self.ctx.function(name)
        if name in self.ctx.params:
            return param(name)
        if name in BUILTINS:
            raise ParseError(f"{name} needs an argument", span, ("'('",))
        if name == "E":
            return sp.E
        if "_" in name:
            base, _, suffix = name.rpartition("_")
            if base in self.ctx.functions and suffix:
                fvars = self.ctx.functions[base]
                if all(ch in fvars for ch in suffix):
                    f = self.ctx.function(base)
                    for ch in suffix:
                        f = sp.diff(f, VARS[ch])
                    return f
        if self.ctx.auto_params:
            return param(name)
        raise ParseError(f"unbound identifier {name!r}", span, ("declared name",))


def parse_expr(text: str, ctx: ParseContext | None = None) -> sp.Expr:
    """Parse ``text`` into an expression."""
    return _Parser(text, ctx or ParseContext()).parse_all()


def parse_field(text: str, ctx: ParseContext | None = None):
    """Parse a vector field into its ``(tau, xi, eta)`` components.

    Accepts ``a*d_t + b*d_x + c*d_u`` or a triple ``(a, b, c)``.
    """
    ctx = ctx or ParseContext()
    p = _Parser(text, ctx, allow_fields=True)
    toks = [tok for tok in p.toks]
    depth = 0
    commas = 0
    for kind, val, _, _ in toks:
        if kind == "op" and val == "(":
            depth += 1
        elif kind == "op" and val == ")":
            depth -= 1
        elif kind == "op" and val == "," and depth == 1:
            commas += 1
    if commas == 2 and toks[0][1] == "(" and toks[-2][1] == ")":
        p.allow_fields = False
        p.expect("(")
        comps = [p.expr()]
        while p.peek()[1] == ",":
            p.take()
            comps.append(p.expr())
        p.expect(")")
        end = p.peek()
        if end[0] != "end":
            raise ParseError(f"unexpected {end[1]!r}", (end[2], end[3]))
        return tuple(comps)
    e = sp.expand(p.parse_all())
    dt, dx, du = (sp.Symbol(n) for n in FIELD_ATOMS)
    comps = []
    for d in (dt, dx, du):
        comps.append(e.coeff(d))
    rest = sp.expand(e - comps[0] * dt - comps[1] * dx - comps[2] * du)
    if rest != 0 or any(c.has(dt, dx, du) for c in comps):
        raise ParseError("a vector field must be linear in d_t, d_x, d_u", (0, len(text)))
    return tuple(comps)


# ---------------------------------------------------------------------------
# printer

_ADD, _MUL, _NEG, _POW, _ATOM = 10, 20, 25, 30, 40


def format_expr(e) -> str:
    """Deterministic text form accepted back by :func:`parse_expr`."""
    return _fmt(sp.sympify(e))[0]


def _wrap(s, prec, need):
    return f"({s})" if prec < need else s


def _fmt(e):
    """Return ``(text, precedence)``."""
    if e.is_Integer:
        return str(e), (_ATOM if e >= 0 else _NEG)
    if e.is_Rational:
        return f"{e.p}/{e.q}", (_MUL if e > 0 else _NEG)
    if e is sp.E:
        return "exp(1)", _ATOM
    if e.is_Symbol:
        return e.name, _ATOM
    if isinstance(e, sp.exp):
        return f"exp({_fmt(e.args[0])[0]})", _ATOM
    if isinstance(e, sp.log):
        return f"ln({_fmt(e.args[0])[0]})", _ATOM
    if isinstance(e, SignAtom):
        return f"sign({_fmt(e.args[0])[0]})", _ATOM
    if isinstance(e, sp.Abs):
        return f"abs({_fmt(e.args[0])[0]})", _ATOM
    if isinstance(e, Antiderivative):
        return f"Int({_fmt(e.args[0])[0]})", _ATOM
    if isinstance(e, AppliedUndef):
        return _fmt_function(e), _ATOM
    if isinstance(e, sp.Derivative) and isinstance(e.expr, AppliedUndef):
        f = e.expr
        if all(a.is_Symbol and a.name in VARS for a in f.args):
            suffix = "".join(v.name * int(n) for v, n in e.variable_count)
            return f"{f.func.__name__}_{suffix}", _ATOM
    if e.is_Add:
        return _fmt_add(e)
    if e.is_Mul or e.is_Pow:
        return _fmt_mul(e)
    return sp.sstr(e), _ATOM


def _fmt_function(f):
    args = f.args
    if all(a.is_Symbol and a.name in VARS for a in args):
        return f.func.__name__
    return f"{f.func.__name__}({', '.join(_fmt(a)[0] for a in args)})"


def _fmt_add(e):
    terms = e.as_ordered_terms()
    parts = []
    for i, term in enumerate(terms):
        neg = term.could_extract_minus_sign()
        body = _fmt(-term if neg else term)
        s = _wrap(body[0], body[1], _MUL)
        if i == 0:
            parts.append(("-" + s) if neg else s)
        else:
            parts.append((" - " if neg else " + ") + s)
    return "".join(parts), _ADD


def _fmt_pow(base, ex):
    b, bp = _fmt(base)
    b = _wrap(b, bp, _ATOM)
    if ex.is_Integer and ex > 0:
        es = str(ex)
    else:
        s, p = _fmt(ex)
        es = _wrap(s, p, _ATOM) if not ex.is_Symbol else s
    return f"{b}^{es}"


def _fmt_mul(e):
    coeff, factors = e.as_coeff_mul()
    if coeff < 0:
        s, _ = _fmt_mul(-e)
        return "-" + s, _NEG
    num, den = [], []
    for f in factors:
        if f.is_Pow and f.exp.is_Number and f.exp < 0:
            den.append(sp.Pow(f.base, -f.exp))
        else:
            num.append(f)
    num.sort(key=lambda f: (not f.is_Add, sp.default_sort_key(f)))
    den.sort(key=sp.default_sort_key)

    def factor_text(f):
        if f.is_Pow:
            if f.exp == 1:
                return _wrap(*_fmt(f.base), _POW)
            return _fmt_pow(f.base, f.exp)
        s, p = _fmt(f)
        return _wrap(s, p, _POW)

    c = sp.Rational(coeff)
    num_s = [factor_text(f) for f in num]
    if c.p != 1 or not num_s:
        num_s.insert(0, str(c.p))
    den_s = [factor_text(f) for f in den]
    if c.q != 1:
        den_s.insert(0, str(c.q))
    text = "*".join(num_s)
    if den_s:
        d = "*".join(den_s)
        text += "/" + (f"({d})" if len(den_s) > 1 else d)
    if len(num_s) == 1 and not den_s and len(factors) == 1 and c == 1:
        # a lone power
        return text, _POW
    return text, _MUL


# ---------------------------------------------------------------------------
# case files
#
#     dcsym-case v1
#     # comment
#     [section]
#     key = "value"

CASE_HEADER = "dcsym-case v1"
_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")
_ENTRY = re.compile(r'^([A-Za-z_][A-Za-z0-9_\']*)\s*=\s*"([^"]*)"$')


@dataclass
class CaseSpec:
    """Sections of a case file as ``{section: {key: value}}``.

    ``lines`` records the source line of each entry for error messages.
    Expressions are resolved by :meth:`context` and :meth:`expr`.
    """

    sections: dict
    lines: dict = field(default_factory=dict)
    source: str = ""

    def section(self, name) -> dict:
        return self.sections.get(name, {})

    def context(self) -> ParseContext:
        funcs = {k: tuple(v.replace(" ", "").split(","))
                 for k, v in self.section("functions").items()}
        opaque_elems = {k: ("x",) if k in "fgh" else ("u",)
                        for k, v in self.section("equation").items() if v == "opaque"}
        return ParseContext(set(self.section("params")), {**opaque_elems, **funcs},
                            auto_params=False)

    def expr(self, section, key, ctx=None):
        text = self.sections[section][key]
        try:
            return parse_expr(text, ctx or self.context())
        except ParseError as exc:
            line = self.lines.get((section, key), 0)
            raise ParseError(f"{self.source}:{line}: [{section}] {key}: {exc}", exc.span,
                             exc.expected) from None


def parse_case_file(text: str, source: str = "<case>") -> CaseSpec:
    """Read the sectioned key/value format; expressions stay unparsed."""
    lines = text.splitlines()
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    body = [(n, ln) for n, ln in body if ln and not ln.startswith("#")]
    if not body or body[0][1] != CASE_HEADER:
        raise ParseError(f"{source}: missing header line {CASE_HEADER!r}", (0, 0),
                         (repr(CASE_HEADER),))
    sections: dict = {}
    where: dict = {}
    current = None
    for n, ln in body[1:]:
        m = _SECTION.match(ln)
        if m:
            current = m.group(1)
            if current in sections:
                raise ParseError(f"{source}:{n}: duplicate section [{current}]", (0, len(ln)))
            sections[current] = {}
            continue
        m = _ENTRY.match(ln)
        if m is None:
            raise ParseError(f"{source}:{n}: expected key = \"value\"", (0, len(ln)),
                             ("[section]", 'key = "value"'))
        if current is None:
            raise ParseError(f"{source}:{n}: entry outside a section", (0, len(ln)))
        key, value = m.group(1), m.group(2)
        if key in sections[current]:
            raise ParseError(f"{source}:{n}: duplicate key {key!r} in [{current}]",
                             (m.start(1), m.end(1)))
        sections[current][key] = value
        where[(current, key)] = n
    return CaseSpec(sections, where, source)
