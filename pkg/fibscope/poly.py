# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""Exact mixed polynomials in z₁..zₙ and their conjugates.

The algebra is sympy's sparse polynomial rings: a mixed polynomial is an
element of QQ_I[z₁..zₙ, z̄₁..z̄ₙ], where the conjugates are independent
generators, and its realification lives in QQ[x₁..x₂ₙ].  The classes here
wrap those ring elements with the variable bookkeeping, the canonical text
form and the compiled evaluators.  Floating point evaluation lives in
`CompiledPoly` and `CompiledRealPoly`, which are built once and then
evaluated over whole arrays of points.
"""

from __future__ import annotations
from typing import *

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.domains.gaussiandomains import GaussianRational
from sympy.polys.matrices import DomainMatrix
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyElement, PolyRing, ring

from .errors import PolynomialError


Exponents = Tuple[int, ...]
Monomial = Tuple[Exponents, Exponents]  # (powers of zᵢ, powers of z̄ᵢ)
Coefficient = GaussianRational
Scalar = Union[GaussianRational, Fraction, int]

R = TypeVar("R", "MixedPoly", "RealPoly")

ONE = QQ_I.one
I = QQ_I.imag_unit


# Coefficients.


def rational(value: object) -> Any:
    """An element of QQ."""
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, float):
        return rational(Fraction(value))
    if isinstance(value, np.generic):
        return rational(value.item())
    return QQ.convert(value)


def gaussian(re: object = 0, im: object = 0) -> GaussianRational:
    """An element of QQ_I; also accepts a complex or an existing element."""
    if isinstance(re, GaussianRational):
        return re if not im else re + gaussian(0, im)
    if isinstance(re, np.generic):
        re = re.item()
    if isinstance(re, complex):
        return QQ_I(rational(re.real), rational(re.imag) + rational(im))
    return QQ_I(rational(re), rational(im))


def conjugate(c: GaussianRational) -> GaussianRational:
    return c.new(c.x, -c.y)


def abs2(c: GaussianRational) -> Any:
    return c.x * c.x + c.y * c.y


def complex_value(c: GaussianRational) -> complex:
    return complex(float(c.x), float(c.y))


def is_real(c: GaussianRational) -> bool:
    return not c.y


# Rings.


@lru_cache(maxsize=None)
def mixed_ring(n: int) -> PolyRing:
    """QQ_I[z₁..zₙ, zb₁..zbₙ] in graded-lex order."""
    names = [f"z{k}" for k in range(1, n + 1)] + [f"zb{k}" for k in range(1, n + 1)]
    return ring(",".join(names), QQ_I, grlex)[0]


@lru_cache(maxsize=None)
def real_ring(m: int, domain: Any = QQ) -> PolyRing:
    """QQ[x₁..xₘ] (or QQ_I[x₁..xₘ] during realification), graded-lex."""
    return ring(",".join(f"x{k}" for k in range(1, m + 1)), domain, grlex)[0]


class MixedPoly:
    """A polynomial in zᵢ and z̄ᵢ with exact Gaussian rational coefficients."""

    __slots__ = ("n", "element")

    def __init__(
        self, n: int, terms: Mapping[Monomial, Scalar] | PolyElement | None = None
    ) -> None:
        ring_ = mixed_ring(n)
        if isinstance(terms, PolyElement):
            if terms.ring != ring_:
                raise PolynomialError(f"element of {terms.ring} used for n={n}")
            element = terms
        else:
            flat: dict[Exponents, GaussianRational] = {}
            for (alpha, beta), coefficient in (terms or {}).items():
                if len(alpha) != n or len(beta) != n:
                    raise PolynomialError(f"monomial {alpha, beta} doesn't fit n={n}")
                if any(e < 0 for e in alpha) or any(e < 0 for e in beta):
                    raise PolynomialError("negative exponent")
                flat[tuple(alpha) + tuple(beta)] = gaussian(coefficient)
            element = ring_.from_dict(flat)
        self.n = n
        self.element: PolyElement = element

    @classmethod
    def zero(cls, n: int) -> MixedPoly:
        return cls(n, mixed_ring(n).zero)

    @classmethod
    def constant(cls, n: int, c: Scalar) -> MixedPoly:
        return cls(n, mixed_ring(n).ground_new(gaussian(c)))

    @classmethod
    def var(cls, n: int, i: int, conjugate: bool = False) -> MixedPoly:
        """zᵢ (or z̄ᵢ), 1-based."""
        if not 1 <= i <= n:
            raise PolynomialError(f"variable index {i} out of range 1..{n}")
        return cls(n, mixed_ring(n).gens[i - 1 + (n if conjugate else 0)])

    def new(self, element: PolyElement) -> MixedPoly:
        return MixedPoly(self.n, element)

    @property
    def terms(self) -> dict[Monomial, GaussianRational]:
        n = self.n
        return {(m[:n], m[n:]): c for m, c in self.element.items()}

    def __len__(self) -> int:
        return len(self.element)

    def _coerce(self, other: object) -> PolyElement:
        if isinstance(other, MixedPoly):
            if other.n != self.n:
                raise PolynomialError(
                    f"mismatched variable counts: {self.n} and {other.n}"
                )
            return other.element
        return self.element.ring.ground_new(gaussian(other))

    def __add__(self, other: object) -> MixedPoly:
        return self.new(self.element + self._coerce(other))

    __radd__ = __add__

    def __neg__(self) -> MixedPoly:
        return self.new(-self.element)

    def __sub__(self, other: object) -> MixedPoly:
        return self.new(self.element - self._coerce(other))

    def __rsub__(self, other: object) -> MixedPoly:
        return self.new(self._coerce(other) - self.element)

    def __mul__(self, other: object) -> MixedPoly:
        return self.new(self.element * self._coerce(other))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> MixedPoly:
        if k < 0:
            raise PolynomialError("negative powers are not polynomial")
        return self.new(self.element ** k)

    def scale(self, c: Scalar) -> MixedPoly:
        return self.new(self.element.mul_ground(gaussian(c)))

    def conj(self) -> MixedPoly:
        n = self.n
        return self.new(
            self.element.ring.from_dict(
                {m[n:] + m[:n]: conjugate(c) for m, c in self.element.items()}
            )
        )

    def wirtinger(self, i: int, conjugate: bool = False) -> MixedPoly:
        """∂/∂zᵢ (or ∂/∂z̄ᵢ), treating zᵢ and z̄ᵢ as independent; 1-based."""
        if not 1 <= i <= self.n:
            raise PolynomialError(f"variable index {i} out of range 1..{self.n}")
        gen = self.element.ring.gens[i - 1 + (self.n if conjugate else 0)]
        return self.new(self.element.diff(gen))

    def is_zero(self) -> bool:
        return not self.element

    @property
    def is_holomorphic(self) -> bool:
        return all(not any(m[self.n :]) for m in self.element)

    @property
    def degree(self) -> int:
        """α-total + β-total of the largest term; -1 for the zero polynomial."""
        return max((sum(m) for m in self.element), default=-1)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self.element}) <= 1

    def leading_form(self) -> MixedPoly:
        if self.is_zero():
            raise PolynomialError("the zero polynomial has no leading form")
        if not self.is_holomorphic:
            raise PolynomialError("leading forms are taken of holomorphic polynomials")
        d = self.degree
        return self.new(
            self.element.ring.from_dict(
                {m: c for m, c in self.element.items() if sum(m) == d}
            )
        )

    def sorted_terms(self) -> list[tuple[Monomial, GaussianRational]]:
        n = self.n
        return [((m[:n], m[n:]), c) for m, c in self.element.terms()]

    def evaluate(self, point: Sequence[object]) -> GaussianRational:
        if len(point) != self.n:
            raise PolynomialError(f"point has {len(point)} coordinates, n={self.n}")
        z = [gaussian(v) for v in point]
        return _substitute(self.element, z + [conjugate(v) for v in z], QQ_I.zero)

    def compile(self) -> CompiledPoly:
        return CompiledPoly(self)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, MixedPoly):
            return self.n == other.n and self.element == other.element
        if isinstance(other, (int, Fraction, GaussianRational)):
            return self == MixedPoly.constant(self.n, other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.n, self.element))

    def __repr__(self) -> str:
        return f"MixedPoly({self.n}, {format_poly(self)!r})"

    def __str__(self) -> str:
        return format_poly(self)


def _substitute(element: PolyElement, values: Sequence[Any], zero: Any) -> Any:
    """Exact value of a ring element with every generator replaced."""
    total = zero
    for mono, c in element.items():
        for v, e in zip(values, mono):
            if e:
                c = c * v ** e
        total += c
    return total


# Free-function spellings of the ring operations.


def wirtinger(p: MixedPoly, i: int, conjugate_flag: bool = False) -> MixedPoly:
    return p.wirtinger(i, conjugate_flag)


def evaluate(p: MixedPoly, point: Sequence[object]) -> GaussianRational:
    return p.evaluate(point)


def evaluate_float(p: MixedPoly, point: Sequence[complex]) -> complex:
    return complex(p.compile()(np.asarray(point, dtype=complex)))


def leading_form(p: MixedPoly) -> MixedPoly:
    return p.leading_form()


class CompiledPoly:
    """Double-precision evaluation of a MixedPoly, vectorized over points.

    Points are complex arrays of shape (..., n).
    """

    def __init__(self, p: MixedPoly) -> None:
        self.n = p.n
        items = list(p.element.items())
        monos = np.array([m for m, _ in items], dtype=np.int64).reshape(len(items), 2 * p.n)
        self.alpha = monos[:, : p.n]
        self.beta = monos[:, p.n :]
        self.coeffs = np.array([complex_value(c) for _, c in items], dtype=complex)

    def monomials(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        zz = z[..., None, :]
        return np.prod(zz ** self.alpha * np.conj(zz) ** self.beta, axis=-1)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if not len(self.coeffs):
            return np.zeros(z.shape[:-1], dtype=complex)
        return self.monomials(z) @ self.coeffs

    def magnitude(self, z: np.ndarray) -> np.ndarray:
        """Σ |cₜ mₜ(z)|, the natural scale of the value at z."""
        z = np.asarray(z, dtype=complex)
        if not len(self.coeffs):
            return np.zeros(z.shape[:-1])
        return np.abs(self.monomials(z)) @ np.abs(self.coeffs)


class CompiledGradient:
    """A compiled MixedPoly together with its Wirtinger derivatives."""

    def __init__(self, p: MixedPoly) -> None:
        self.n = p.n
        self.value = p.compile()
        self.dz = [p.wirtinger(i).compile() for i in range(1, p.n + 1)]
        self.dzbar = [p.wirtinger(i, True).compile() for i in range(1, p.n + 1)]

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.value(z)

    def real_jacobian(self, z: np.ndarray) -> np.ndarray:
        """Rows (Re f, Im f) differentiated in x₁..x₂ₙ; shape (..., 2, 2n)."""
        z = np.asarray(z, dtype=complex)
        fz = np.stack([d(z) for d in self.dz], axis=-1)
        fzb = np.stack([d(z) for d in self.dzbar], axis=-1)
        fx = fz + fzb
        fy = 1j * (fz - fzb)
        grad = np.empty(z.shape[:-1] + (2 * self.n,), dtype=complex)
        grad[..., 0::2] = fx
        grad[..., 1::2] = fy
        return np.stack([grad.real, grad.imag], axis=-2)


def to_complex(x: np.ndarray) -> np.ndarray:
    """Real (..., 2n) coordinates to complex (..., n) under zⱼ = x₂ⱼ₋₁ + i·x₂ⱼ."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    x = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    x[..., 0::2] = z.real
    x[..., 1::2] = z.imag
    return x


class RealPoly:
    """A polynomial in real variables x₁..xₘ with rational coefficients."""

    __slots__ = ("m", "element")

    def __init__(
        self, m: int, terms: Mapping[Exponents, Fraction | int] | PolyElement | None = None
    ) -> None:
        ring_ = real_ring(m)
        if isinstance(terms, PolyElement):
            if terms.ring != ring_:
                raise PolynomialError(f"element of {terms.ring} used for m={m}")
            element = terms
        else:
            flat = {}
            for exps, c in (terms or {}).items():
                if len(exps) != m:
                    raise PolynomialError(f"exponents {exps} don't fit m={m}")
                flat[tuple(exps)] = rational(c)
            element = ring_.from_dict(flat)
        self.m = m
        self.element: PolyElement = element

    @classmethod
    def constant(cls, m: int, c: Fraction | int) -> RealPoly:
        return cls(m, real_ring(m).ground_new(rational(c)))

    @classmethod
    def var(cls, m: int, k: int) -> RealPoly:
        return cls(m, real_ring(m).gens[k - 1])

    def new(self, element: PolyElement) -> RealPoly:
        return RealPoly(self.m, element)

    def _coerce(self, other: object) -> PolyElement:
        if isinstance(other, RealPoly):
            if other.m != self.m:
                raise PolynomialError(
                    f"mismatched variable counts: {self.m} and {other.m}"
                )
            return other.element
        if isinstance(other, (int, Fraction)):
            return self.element.ring.ground_new(rational(other))
        raise TypeError(f"cannot combine RealPoly with {other!r}")

    def __add__(self, other: object) -> RealPoly:
        return self.new(self.element + self._coerce(other))

    __radd__ = __add__

    def __neg__(self) -> RealPoly:
        return self.new(-self.element)

    def __sub__(self, other: object) -> RealPoly:
        return self.new(self.element - self._coerce(other))

    def __rsub__(self, other: object) -> RealPoly:
        return self.new(self._coerce(other) - self.element)

    def __mul__(self, other: object) -> RealPoly:
        return self.new(self.element * self._coerce(other))

    __rmul__ = __mul__

    def diff(self, k: int) -> RealPoly:
        """∂/∂xₖ, 1-based."""
        return self.new(self.element.diff(self.element.ring.gens[k - 1]))

    def is_zero(self) -> bool:
        return not self.element

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.element), default=-1)

    def evaluate(self, point: Sequence[object]) -> Any:
        return _substitute(self.element, [rational(v) for v in point], QQ.zero)

    def compile(self) -> CompiledRealPoly:
        return CompiledRealPoly(self)

    def sorted_terms(self) -> list[tuple[Exponents, Any]]:
        return self.element.terms()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RealPoly):
            return self.m == other.m and self.element == other.element
        if isinstance(other, (int, Fraction)):
            return self == RealPoly.constant(self.m, other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.m, self.element))

    def __repr__(self) -> str:
        return f"RealPoly({self.m}, {format_real_poly(self)!r})"

    def __str__(self) -> str:
        return format_real_poly(self)


class CompiledRealPoly:
    def __init__(self, p: RealPoly) -> None:
        items = list(p.element.items())
        self.exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), p.m)
        self.coeffs = np.array([float(c) for _, c in items])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not len(self.coeffs):
            return np.zeros(x.shape[:-1])
        return np.prod(x[..., None, :] ** self.exps, axis=-1) @ self.coeffs


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights a₁..aₙ of ρ = Σ aᵢ|zᵢ|², not all zero."""

    a: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        a = tuple(Fraction(v) for v in self.a)
        object.__setattr__(self, "a", a)
        if any(v < 0 for v in a):
            raise PolynomialError("weights must be nonnegative")
        if not any(a):
            raise PolynomialError("at least one weight must be positive")

    @property
    def n(self) -> int:
        return len(self.a)

    def scaled(self, factor: Fraction | int) -> WeightVector:
        return WeightVector(tuple(v * factor for v in self.a))

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.a])

    def rho(self) -> MixedPoly:
        n = self.n
        total = MixedPoly.zero(n)
        for i, a in enumerate(self.a, 1):
            if a:
                total = total + (
                    MixedPoly.var(n, i) * MixedPoly.var(n, i, conjugate=True)
                ).scale(a)
        return total


@dataclass(frozen=True)
class PolyMap:
    """A holomorphic polynomial mapping G: Cⁿ → Cⁿ⁻¹."""

    n: int
    components: tuple[MixedPoly, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.n - 1:
            raise PolynomialError(
                f"expected {self.n - 1} components for n={self.n},"
                f" got {len(self.components)}"
            )
        for p in self.components:
            if p.n != self.n:
                raise PolynomialError(
                    f"component has {p.n} variables, expected {self.n}"
                )
            if not p.is_holomorphic:
                raise PolynomialError(f"component {p} is not holomorphic")

    def compile(self) -> list[CompiledGradient]:
        return [CompiledGradient(p) for p in self.components]


@dataclass(frozen=True)
class RealPolyMap:
    m_in: int
    components: tuple[RealPoly, ...]

    def evaluate(self, point: Sequence[object]) -> tuple[Any, ...]:
        return tuple(p.evaluate(point) for p in self.components)

    def jacobian(self) -> list[list[RealPoly]]:
        return [[p.diff(k) for k in range(1, self.m_in + 1)] for p in self.components]


def realify_poly(p: MixedPoly) -> tuple[RealPoly, RealPoly]:
    """(Re p, Im p) as polynomials in x₁..x₂ₙ."""
    n, m = p.n, 2 * p.n
    complex_ring = real_ring(m, QQ_I)
    x = complex_ring.gens
    z = [x[2 * j] + x[2 * j + 1].mul_ground(I) for j in range(n)]
    zbar = [x[2 * j] - x[2 * j + 1].mul_ground(I) for j in range(n)]
    images = z + zbar
    total = complex_ring.zero
    for mono, c in p.element.items():
        term = complex_ring.ground_new(c)
        for image, e in zip(images, mono):
            if e:
                term = term * image ** e
        total += term
    ring_ = real_ring(m)
    re = ring_.from_dict({e: v.x for e, v in total.items()})
    im = ring_.from_dict({e: v.y for e, v in total.items()})
    return RealPoly(m, re), RealPoly(m, im)


def realify(g: PolyMap) -> RealPolyMap:
    components: list[RealPoly] = []
    for p in g.components:
        components.extend(realify_poly(p))
    return RealPolyMap(2 * g.n, tuple(components))


def realify_rho(w: WeightVector) -> RealPoly:
    m = 2 * w.n
    x = real_ring(m).gens
    total = real_ring(m).zero
    for i, a in enumerate(w.a):
        if a:
            total += (x[2 * i] ** 2 + x[2 * i + 1] ** 2).mul_ground(rational(a))
    return RealPoly(m, total)


def determinant(matrix: Sequence[Sequence[R]], one: R) -> R:
    """Exact determinant over the polynomial ring of `one` (fraction-free Bareiss)."""
    size = len(matrix)
    domain = one.element.ring.to_domain()
    rows = [[entry.element for entry in row] for row in matrix]
    return one.new(DomainMatrix(rows, (size, size), domain).det())


# Canonical text form.


def format_rational(q: Any) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def format_coefficient(c: GaussianRational) -> str:
    """A coefficient as a self-contained expression (parenthesized if needed)."""
    if is_real(c):
        text = format_rational(c.x)
        return text if c.x >= 0 and c.x.denominator == 1 else f"({text})"
    if not c.x:
        if c.y == 1:
            return "i"
        return f"({format_rational(c.y)}*i)" if c.y != -1 else "(-i)"
    sign = "+" if c.y > 0 else "-"
    im = abs(c.y)
    im_text = "i" if im == 1 else f"{format_rational(im)}*i"
    return f"({format_rational(c.x)} {sign} {im_text})"


def _join_terms(parts: Iterable[tuple[str, bool]]) -> str:
    """Join (text, negative) pairs into `a + b - c`."""
    out = ""
    for text, negative in parts:
        if not out:
            out = f"-{text}" if negative else text
        else:
            out += f" - {text}" if negative else f" + {text}"
    return out or "0"


def _term_text(c: GaussianRational, factors: list[str]) -> tuple[str, bool]:
    negative = False
    if is_real(c) and c.x < 0:
        negative = True
        c = -c
    if not factors:
        if is_real(c):
            return format_rational(c.x), negative
        return format_coefficient(c), negative
    if c == ONE:
        return "*".join(factors), negative
    if is_real(c) and c.x.denominator == 1:
        return "*".join([str(c.x.numerator)] + factors), negative
    return "*".join([format_coefficient(c)] + factors), negative


def _power(name: str, e: int) -> str:
    return name if e == 1 else f"{name}^{e}"


def format_poly(p: MixedPoly) -> str:
    parts = []
    for (alpha, beta), c in p.sorted_terms():
        factors = [_power(f"z{k + 1}", e) for k, e in enumerate(alpha) if e]
        factors += [_power(f"conj(z{k + 1})", e) for k, e in enumerate(beta) if e]
        parts.append(_term_text(c, factors))
    return _join_terms(parts)


def format_real_poly(p: RealPoly) -> str:
    parts = []
    for exps, c in p.sorted_terms():
        factors = [_power(f"x{k + 1}", e) for k, e in enumerate(exps) if e]
        parts.append(_term_text(gaussian(c), factors))
    return _join_terms(parts)
