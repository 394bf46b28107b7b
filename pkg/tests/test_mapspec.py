from fractions import Fraction

import numpy as np
import pytest

from fibscope.errors import MapSpecError, SpecSemanticError, SpecSyntaxError
from fibscope.expr import Conj, Phi, Var, evaluate_expr, format_expr, growth_degree, parse_expression, to_poly
from fibscope.mapspec import SHIPPED, format_spec, load_mapping, parse_mapping
from fibscope.poly import MixedPoly, format_poly


BROUGHTON = """\
# Broughton
n = 2
G1 = z + z^2*w
rho = 0, 1
"""


def test_parse_broughton():
    spec = parse_mapping(BROUGHTON)
    assert spec.n == 2
    z, w = MixedPoly.var(2, 1), MixedPoly.var(2, 2)
    assert spec.components == (z + z * z * w,)
    assert spec.weights.a == (Fraction(0), Fraction(1))
    assert spec.charts == ()


def test_statements_on_one_line():
    spec = parse_mapping("n = 3; G1 = z1; G2 = z1*z3**2 + z2; rho = 0, 0, 1")
    assert format_poly(spec.components[1]) == "z1*z3^2 + z2"
    assert spec.weights.a == (Fraction(0), Fraction(0), Fraction(1))


def test_canonical_form_is_stable():
    for name in SHIPPED:
        spec = load_mapping(name)
        text = format_spec(spec)
        assert format_spec(parse_mapping(text)) == text


def test_shipped_examples():
    assert set(SHIPPED) == {"broughton", "suspension", "twistsum-zeta", "twistsum-w"}
    assert load_mapping("twistsum-zeta").weights.a == (0, 0, 1)
    assert load_mapping("twistsum-w").weights.a == (0, 1, 0)
    assert load_mapping("examples/broughton.map").n == 2
    assert load_mapping("suspension").charts == (Phi(),)


def test_dimension_mismatch():
    with pytest.raises(SpecSemanticError) as excinfo:
        parse_mapping("n = 3\nG1 = z\nrho = 1, 1, 1\n")
    assert "dimension mismatch" in str(excinfo.value)


def test_conjugate_in_component_is_positioned():
    with pytest.raises(SpecSemanticError) as excinfo:
        parse_mapping("n = 2\nG1 = z + conj(w)\nrho = 0, 1\n")
    assert excinfo.value.line == 2
    assert excinfo.value.column == 10


def test_syntax_errors_carry_positions():
    with pytest.raises(SpecSyntaxError) as excinfo:
        parse_mapping("n = 2\nG1 = z + * w\nrho = 0, 1\n")
    assert excinfo.value.line == 2
    assert excinfo.value.column == 10
    assert "line=2 col=10" in excinfo.value.diagnostic()

    with pytest.raises(SpecSyntaxError):
        parse_mapping("n = 2\nG1 = z + 0.5*w\nrho = 0, 1\n")
    with pytest.raises(SpecSyntaxError):
        parse_mapping("n = 2\nG1 = (z + w\nrho = 0, 1\n")
    with pytest.raises(SpecSyntaxError):
        parse_mapping("n = 2\nG1 = z\nrho = 0, 1\nbogus = 3\n")


def test_semantic_errors():
    bad = [
        "n = 1\nrho = 1\n",
        "n = 2\nG1 = z\n",
        "n = 2\nG1 = z\nG1 = w\nrho = 0, 1\n",
        "n = 2\nG1 = z\nrho = 0, 0\n",
        "n = 2\nG1 = z\nrho = 0, 1, 1\n",
        "n = 2\nG1 = z/w\nrho = 0, 1\n",
        "n = 2\nG1 = z/0\nrho = 0, 1\n",
        "n = 2\nG1 = q\nrho = 0, 1\n",
        "n = 2\nG1 = z\nrho = 0, 1\ndecay2 = 1\n",
    ]
    for text in bad:
        with pytest.raises(MapSpecError):
            parse_mapping(text)


def test_adversarial_input_is_rejected_cleanly():
    with pytest.raises(MapSpecError):
        parse_mapping("n = 3\nG1 = (z1 + z2 + z3 + 1)^64\nG2 = z1\nrho = 1, 1, 1\n")
    with pytest.raises(MapSpecError):
        parse_mapping("n = 2\nG1 = " + "(" * 5000 + "z" + ")" * 5000 + "\nrho = 1, 1\n")
    with pytest.raises(MapSpecError):
        parse_mapping("n = 2\nG1 = z^65\nrho = 1, 1\n")
    with pytest.raises(MapSpecError):
        load_mapping("no/such/file.map")


def test_expression_text():
    e = parse_expression("conj(z1)*z2 - (z1 + 2)^2", 2, holomorphic=False)
    assert format_expr(e) == "conj(z1)*z2 - (z1 + 2)^2"
    assert format_expr(parse_expression("-(z1 - z2)", 2, holomorphic=False)) == "-(z1 - z2)"
    poly = to_poly(parse_expression("(z1 + i)*(z1 - i)", 2, holomorphic=True), 2)
    assert format_poly(poly) == "z1^2 + 1"


def test_chart_evaluation_and_growth():
    e = parse_expression("z1*conj(z1) + phi", 2, holomorphic=False)
    z = np.array([[1 + 1j, 2j]])
    phi = np.array([0.25])
    assert evaluate_expr(e, z, phi)[0] == pytest.approx(2.25)
    assert growth_degree(e) == 2
    assert growth_degree(Conj(Var(1))) == 1
    assert growth_degree(parse_expression("phi^2", 2, holomorphic=False)) == -4


MIXED = """\
n = 3
G1 = 1/2*z1^2 - i*z2 + (2 - 3/4*i)*z1*z3
G2 = z3 + 5/3
rho = 1/2, 0, 3
chart1 = conj(z1)*z2/2 - i*phi
chart2 = (z1 + conj(z3))^2
decay1 = 2
"""


def test_canonical_form_round_trips():
    spec = parse_mapping(MIXED)
    assert spec.decay_exponents == (2, None)
    assert spec.weights.a == (Fraction(1, 2), Fraction(0), Fraction(3))
    text = format_spec(spec)
    assert "(2 - 3/4*i)*z1*z3" in text
    assert parse_mapping(text) == spec
    assert format_spec(parse_mapping(text)) == text


def test_constant_folding_is_bounded():
    spec = parse_mapping("n = 2\nG1 = (2^64)^64*z1\nrho = 0, 1\n")
    assert spec.components[0] == MixedPoly.var(2, 1).scale(2 ** 4096)
    text = "n = 2\nG1 = (((((2^64)^64)^64)^64)^64)*z1\nrho = 0, 1\n"
    with pytest.raises(SpecSemanticError) as excinfo:
        parse_mapping(text)
    assert excinfo.value.line == 2
    assert excinfo.value.column == 20
    assert "bits" in excinfo.value.message
    with pytest.raises(SpecSemanticError):
        parse_mapping("n = 2\nG1 = " + "*".join(["(2^64)^64"] * 3) + "*z1\nrho = 0, 1\n")
