from fractions import Fraction
import random

import numpy as np
import pytest

from fibscope.errors import PolynomialError
from fibscope.poly import (
    MixedPoly,
    PolyMap,
    RealPoly,
    WeightVector,
    I,
    abs2,
    complex_value,
    conjugate,
    determinant,
    evaluate,
    evaluate_float,
    format_poly,
    gaussian,
    leading_form,
    realify,
    realify_poly,
    realify_rho,
    to_complex,
    to_real,
)


def z(i: int, n: int = 2) -> MixedPoly:
    return MixedPoly.var(n, i)


def zbar(i: int, n: int = 2) -> MixedPoly:
    return MixedPoly.var(n, i, conjugate=True)


def x(k: int, m: int = 4) -> RealPoly:
    return RealPoly.var(m, k)


def random_mixed(rng: random.Random, n: int, degree: int) -> MixedPoly:
    terms = {}
    for _ in range(rng.randint(1, 5)):
        alpha = [0] * n
        beta = [0] * n
        for _ in range(rng.randint(0, degree)):
            if rng.random() < 0.5:
                alpha[rng.randrange(n)] += 1
            else:
                beta[rng.randrange(n)] += 1
        terms[(tuple(alpha), tuple(beta))] = gaussian(rng.randint(-3, 3), rng.randint(-3, 3))
    return MixedPoly(n, terms)


def test_gaussian_coefficients():
    a = gaussian(1, 2)
    b = gaussian(Fraction(3, 2), -1)
    assert a * b == gaussian(Fraction(7, 2), 2)
    assert (a / b) * b == a
    assert conjugate(a) * a == gaussian(abs2(a))
    assert complex_value(a ** 3) == pytest.approx(complex(1, 2) ** 3)
    assert gaussian(0.5 - 0.25j) == gaussian(Fraction(1, 2), Fraction(-1, 4))
    assert gaussian(a) is a
    with pytest.raises(ZeroDivisionError):
        a / gaussian()


def test_wirtinger_treats_conjugates_as_independent():
    p = z(1) * z(1) * zbar(2) + zbar(1).scale(3)
    assert p.wirtinger(1) == z(1).scale(2) * zbar(2)
    assert p.wirtinger(1, conjugate=True) == MixedPoly.constant(2, 3)
    assert p.wirtinger(2) == MixedPoly.zero(2)
    assert p.wirtinger(2, conjugate=True) == z(1) * z(1)
    assert not p.is_holomorphic
    assert (z(1) * z(2)).is_holomorphic


def test_conj_is_an_involution():
    rng = random.Random(1)
    for _ in range(50):
        p = random_mixed(rng, 3, 3)
        assert p.conj().conj() == p
        assert (p * p.conj()).conj() == p * p.conj()


def test_leading_form():
    g = z(1) + z(1) * z(1) * z(2)
    assert g.leading_form() == z(1) * z(1) * z(2)
    assert g.degree == 3
    assert g.leading_form().is_homogeneous()
    with pytest.raises(PolynomialError):
        MixedPoly.zero(2).leading_form()
    with pytest.raises(PolynomialError):
        (z(1) * zbar(1)).leading_form()


def test_mismatched_variable_counts():
    with pytest.raises(PolynomialError):
        z(1, 2) + z(1, 3)
    with pytest.raises(PolynomialError):
        PolyMap(2, (z(1, 3),))
    with pytest.raises(PolynomialError):
        PolyMap(2, (zbar(1),))
    with pytest.raises(PolynomialError):
        PolyMap(3, (z(1, 3),))


def test_weights():
    with pytest.raises(PolynomialError):
        WeightVector((Fraction(0), Fraction(0)))
    with pytest.raises(PolynomialError):
        WeightVector((Fraction(-1), Fraction(1)))
    w = WeightVector((Fraction(0), Fraction(1)))
    assert w.rho() == z(2) * zbar(2)
    assert realify_rho(w) == x(3) * x(3) + x(4) * x(4)


def test_realify_broughton_factor():
    # 1 + 2zw splits into 1 + 2x1x3 - 2x2x4 and 2x2x3 + 2x1x4.
    re, im = realify_poly(z(1) * z(2) * 2 + 1)
    assert re == x(1) * x(3) * 2 - x(2) * x(4) * 2 + 1
    assert im == x(2) * x(3) * 2 + x(1) * x(4) * 2


def test_realify_agrees_with_evaluation():
    rng = random.Random(7)
    for _ in range(30):
        p = random_mixed(rng, 2, 4)
        re, im = realify_poly(p)
        point = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(4)]
        value = p.evaluate(
            [gaussian(point[0], point[1]), gaussian(point[2], point[3])]
        )
        assert re.evaluate(point) == value.x
        assert im.evaluate(point) == value.y


def test_compiled_matches_exact():
    rng = random.Random(3)
    points = np.random.default_rng(3).standard_normal((20, 3)) + 1j * np.random.default_rng(
        4
    ).standard_normal((20, 3))
    for _ in range(20):
        p = random_mixed(rng, 3, 3)
        fast = p.compile()(points)
        for k in range(len(points)):
            exact = complex_value(p.evaluate([complex(v) for v in points[k]]))
            assert fast[k] == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_real_and_complex_coordinates():
    w = np.array([[1 + 2j, -3 + 0.5j]])
    assert to_real(w).tolist() == [[1.0, 2.0, -3.0, 0.5]]
    assert np.array_equal(to_complex(to_real(w)), w)


def test_determinant():
    one = MixedPoly.constant(2, 1)
    matrix = [[z(1), z(2)], [zbar(2), zbar(1)]]
    assert determinant(matrix, one) == z(1) * zbar(1) - z(2) * zbar(2)
    ints = [[RealPoly.constant(1, v) for v in row] for row in ((2, 0, 1), (1, 3, 2), (1, 1, 2))]
    assert determinant(ints, RealPoly.constant(1, 1)) == RealPoly.constant(1, 6)


def test_format_poly():
    p = (z(1) * z(2) * zbar(2)).scale(-4) - zbar(2).scale(2)
    assert format_poly(p) == "-4*z1*z2*conj(z2) - 2*conj(z2)"
    assert format_poly(MixedPoly.zero(2)) == "0"
    half_i = z(1).scale(gaussian(Fraction(1, 2), 1))
    assert format_poly(half_i) == "(1/2 + i)*z1"


def test_realify_map():
    g = PolyMap(2, (z(1) + z(1) * z(1) * z(2),))
    re, im = realify(g).components
    assert re == x(1) + x(1) * x(1) * x(3) - x(2) * x(2) * x(3) - x(1) * x(2) * x(4) * 2
    assert im == x(2) + x(1) * x(2) * x(3) * 2 + x(1) * x(1) * x(4) - x(2) * x(2) * x(4)
    assert realify(PolyMap(2, (z(1).scale(I),))).components == (-x(2), x(1))


def test_real_jacobian_has_cauchy_riemann_structure():
    rng = random.Random(11)
    points = np.random.default_rng(11).standard_normal((10, 4))
    for _ in range(10):
        p = random_mixed(rng, 2, 4)
        p = MixedPoly(2, {m: c for m, c in p.terms.items() if not any(m[1])})
        jacobian = realify(PolyMap(2, (p,))).jacobian()
        for point in points:
            exact = np.array([[d.compile()(point) for d in row] for row in jacobian])
            zpoint = to_complex(point)
            for j in range(2):
                dp = evaluate_float(p.wirtinger(j + 1), zpoint)
                block = np.array([[dp.real, -dp.imag], [dp.imag, dp.real]])
                assert np.allclose(exact[:, 2 * j : 2 * j + 2], block, atol=1e-10)


def test_leading_form_is_multiplicative():
    rng = random.Random(5)
    for _ in range(50):
        p, q = (random_mixed(rng, 3, 4) for _ in range(2))
        p = MixedPoly(3, {m: c for m, c in p.terms.items() if not any(m[1])})
        q = MixedPoly(3, {m: c for m, c in q.terms.items() if not any(m[1])})
        if p.is_zero() or q.is_zero():
            continue
        assert leading_form(p * q) == leading_form(p) * leading_form(q)
        assert (p * q).degree == p.degree + q.degree


def test_evaluate():
    g = z(1) + z(1) * z(1) * z(2)
    assert evaluate(g, [1, 0]) == gaussian(1)
    assert evaluate(z(1) * zbar(1), [complex(3, 4), 0]) == gaussian(25)
    h = zbar(2).scale(-2) * (z(1) * z(2) * 2 + 1)
    assert evaluate(h, [1, Fraction(-1, 2)]) == gaussian()
    assert evaluate_float(g, [2 + 1j, 0.5]) == pytest.approx((2 + 1j) + (2 + 1j) ** 2 * 0.5)
