import pytest
import sympy as sp

from dcsym.expr import SignAtom, opaque, param, t, u, x
from dcsym.parser import ParseContext, ParseError, format_expr, parse_case_file, parse_expr, \
    parse_field

CTX = ParseContext({"p"}, {"f": ("x",), "A": ("u",), "tau": ("t", "x")}, auto_params=False)


def test_precedence():
    assert parse_expr("-x^2") == -x**2
    assert parse_expr("2^3^2") == 512
    assert parse_expr("1/2*x") == x / 2
    assert parse_expr("x - -u") == x + u


def test_functions_and_derivative_names():
    f, A = opaque("f", x), opaque("A", u)
    assert parse_expr("f_xx + A_u", CTX) == sp.diff(f, x, 2) + sp.diff(A, u)
    tau = opaque("tau", t, x)
    assert parse_expr("tau_tx", CTX) == sp.diff(tau, t, x)
    assert parse_expr("abs(x)", CTX) == x * SignAtom(x)
    assert parse_expr("log(x)") == parse_expr("ln(x)") == sp.log(x)
    assert parse_expr("sqrt(u)") == sp.sqrt(u)


def test_parameters():
    assert parse_expr("p*x", CTX) == param("p") * x
    with pytest.raises(ParseError, match="unbound identifier 'q'"):
        parse_expr("q*x", CTX)


@pytest.mark.parametrize("text, span", [
    ("x+*2", (2, 3)),
    ("2x", (1, 2)),
    ("(x", (2, 2)),
    ("x)", (1, 2)),
    ("d_t", (0, 3)),
])
def test_errors_carry_spans(text, span):
    with pytest.raises(ParseError) as info:
        parse_expr(text)
    assert info.value.span == span


def test_fields():
    assert parse_field("(t, x, -u)") == (t, x, -u)
    assert parse_field("2*t*d_t + x*d_x") == (2 * t, x, 0)
    assert parse_field("d_u") == (0, 0, 1)
    with pytest.raises(ParseError, match="linear"):
        parse_field("d_t*d_x")


@pytest.mark.parametrize("text, expected", [
    ("-x^2 + 2^3^2", "512 - x^2"),
    ("abs(x)^p*exp(-u)/(1+x^2)", "(x*sign(x))^p*exp(-u)/(x^2 + 1)"),
    ("f_xx + A_u*u", "u*A_u + f_xx"),
])
def test_printer(text, expected):
    assert format_expr(parse_expr(text, CTX)) == expected


CASE = """dcsym-case v1
# comment
[case]
id = "9.9"
table = "9"
gauge = "g=1"

[equation]
f = "x^p"
A = "exp(u)"

[params]
p = "2"
"""


def test_case_file():
    spec = parse_case_file(CASE)
    assert spec.section("case")["id"] == "9.9"
    assert spec.section("params") == {"p": "2"}
    assert spec.section("missing") == {}


def test_case_file_needs_header():
    with pytest.raises(ParseError):
        parse_case_file(CASE.replace("dcsym-case v1", "other"))
