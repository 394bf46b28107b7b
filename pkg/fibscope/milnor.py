# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""The Milnor set M_G = Sing(G, ρ) = h⁻¹(0).

For G: Cⁿ → Cⁿ⁻¹ the signed maximal minors vᵢ of the complex Jacobian form
a vector field tangent to the fibers of G, and

    h(z) = 2 Σ aᵢ vᵢ(z) z̄ᵢ

vanishes exactly where the real Jacobian of (G, ρ) drops rank.
"""

from __future__ import annotations
from typing import *

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DegeneratePresentation
from .models import EquivalenceReport, SampleCloud, SmoothnessReport, Violation
from .poly import (
    CompiledGradient,
    MixedPoly,
    PolyMap,
    RealPoly,
    WeightVector,
    determinant,
    format_poly,
    format_real_poly,
    realify,
    realify_poly,
    realify_rho,
    to_complex,
    to_real,
)


def complex_jacobian(g: PolyMap) -> list[list[MixedPoly]]:
    return [[p.wirtinger(i) for i in range(1, g.n + 1)] for p in g.components]


@dataclass(frozen=True)
class CofactorField:
    v: tuple[MixedPoly, ...]

    def apply(self, p: MixedPoly) -> MixedPoly:
        """Σ vᵢ ∂p/∂zᵢ."""
        total = MixedPoly.zero(p.n)
        for i, vi in enumerate(self.v, 1):
            if not vi.is_zero():
                total = total + vi * p.wirtinger(i)
        return total

    def tangency_defects(self, g: PolyMap) -> list[MixedPoly]:
        """Σ vᵢ ∂Gⱼ/∂zᵢ per component; all zero for a correct field."""
        return [self.apply(p) for p in g.components]


def cofactor_field(g: PolyMap) -> CofactorField:
    jac = complex_jacobian(g)
    one = MixedPoly.constant(g.n, 1)
    v = []
    for i in range(g.n):
        block = [[row[c] for c in range(g.n) if c != i] for row in jac]
        minor = determinant(block, one)
        v.append(minor if i % 2 == 0 else -minor)
    return CofactorField(tuple(v))


@dataclass(frozen=True)
class MilnorPresentation:
    map: PolyMap
    weights: WeightVector
    cofactors: CofactorField
    h: MixedPoly
    h_real: tuple[RealPoly, RealPoly]

    @property
    def n(self) -> int:
        return self.map.n

    @property
    def degenerate(self) -> bool:
        return self.h.is_zero()

    @cached_property
    def minors(self) -> list[RealPoly]:
        """All maximal minors of the real Jacobian of (G, ρ), column k removed."""
        m = 2 * self.n
        rows = realify(self.map).jacobian()
        rho = realify_rho(self.weights)
        rows.append([rho.diff(k) for k in range(1, m + 1)])
        one = RealPoly.constant(m, 1)
        result = []
        for k in range(m):
            block = [[row[c] for c in range(m) if c != k] for row in rows]
            result.append(determinant(block, one))
        return result

    @cached_property
    def compiled_h(self) -> CompiledGradient:
        return CompiledGradient(self.h)

    @cached_property
    def compiled_map(self) -> list[CompiledGradient]:
        return self.map.compile()

    def residual(self, z: np.ndarray) -> np.ndarray:
        """|h(z)| relative to the sum of the magnitudes of its terms (at least 1)."""
        z = np.asarray(z, dtype=complex)
        value = np.abs(self.compiled_h(z))
        scale = np.maximum(1.0, self.compiled_h.value.magnitude(z))
        return value / scale

    def g_values(self, z: np.ndarray) -> np.ndarray:
        """G(z) as real coordinates, shape (..., 2(n-1))."""
        z = np.asarray(z, dtype=complex)
        return to_real(np.stack([c(z) for c in self.compiled_map], axis=-1))

    def g_jacobian(self, z: np.ndarray) -> np.ndarray:
        """Real Jacobian of G, shape (..., 2(n-1), 2n)."""
        z = np.asarray(z, dtype=complex)
        return np.concatenate([c.real_jacobian(z) for c in self.compiled_map], axis=-2)

    def rho_gradient(self, z: np.ndarray) -> np.ndarray:
        x = to_real(np.asarray(z, dtype=complex))
        return 2.0 * np.repeat(self.weights.as_floats(), 2) * x

    def rho_values(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (np.abs(z) ** 2) @ self.weights.as_floats()

    def normalized_jacobian(self, z: np.ndarray, chart: str = "rho") -> np.ndarray:
        """Real Jacobian of (G, ρ) or (G, φ) with rescaled rows.

        G rows are scaled to unit length; the last row is divided by
        2·max(a)·(1 + |x|), the ρ-gradient's natural size, and for φ by the
        same factor over (1 + ρ)².
        """
        z = np.asarray(z, dtype=complex)
        jac_g = self.g_jacobian(z)
        norms = np.linalg.norm(jac_g, axis=-1, keepdims=True)
        jac_g = jac_g / np.where(norms > 0, norms, 1.0)
        scale = 2.0 * float(max(self.weights.a)) * (1.0 + np.linalg.norm(z, axis=-1))
        grad = self.rho_gradient(z)
        if chart == "phi":
            damping = (1.0 + self.rho_values(z)) ** 2
            grad = -grad / damping[..., None]
            scale = scale / damping
        elif chart != "rho":
            raise ConfigurationError(f"unknown chart {chart!r}")
        last = (grad / scale[..., None])[..., None, :]
        return np.concatenate([jac_g, last], axis=-2)

    def minor_norm(self, z: np.ndarray) -> np.ndarray:
        """Norm of the maximal minors of the normalized (G, ρ) Jacobian over
        the volume spanned by the G rows; the sine-like distance of the ρ row
        from the row space of DG."""
        mat = self.normalized_jacobian(z)
        m = mat.shape[-1]
        dets = np.stack(
            [np.linalg.det(np.delete(mat, k, axis=-1)) for k in range(m)], axis=-1
        )
        gram = mat[..., :-1, :] @ np.swapaxes(mat[..., :-1, :], -1, -2)
        volume = np.sqrt(np.abs(np.linalg.det(gram)))
        return np.linalg.norm(dets, axis=-1) / np.where(volume > 0, volume, 1.0)


def milnor_h(g: PolyMap, w: WeightVector) -> MilnorPresentation:
    if w.n != g.n:
        raise ConfigurationError(f"{w.n} weights for a map of {g.n} variables")
    field = cofactor_field(g)
    h = MixedPoly.zero(g.n)
    for i, (a, vi) in enumerate(zip(w.a, field.v), 1):
        if a and not vi.is_zero():
            h = h + (vi * MixedPoly.var(g.n, i, conjugate=True)).scale(2 * a)
    return MilnorPresentation(
        map=g,
        weights=w,
        cofactors=field,
        h=h,
        h_real=realify_poly(h),
    )


def format_presentation(pres: MilnorPresentation) -> str:
    lines = [f"h = {format_poly(pres.h)}"]
    for i, vi in enumerate(pres.cofactors.v, 1):
        lines.append(f"v{i} = {format_poly(vi)}")
    lines.append(f"Re h = {format_real_poly(pres.h_real[0])}")
    lines.append(f"Im h = {format_real_poly(pres.h_real[1])}")
    return "\n".join(lines) + "\n"


def verify_equivalence(
    pres: MilnorPresentation,
    samples: SampleCloud,
    tol: float = 1e-8,
    rank_tol: float = 1e-8,
    band: float = 1.0,
) -> EquivalenceReport:
    """Check pointwise that |h| ≈ 0 exactly where (G, ρ) drops rank, and that
    the ranks of D(G, ρ) and D(G, φ) agree.

    With the default `band` of 1 every disagreement at `tol` is a violation.
    A larger band forgives points where both |h| and the minor norm stay
    below `band * tol`, i.e. points that sit too close to the threshold for
    the two differently scaled quantities to be compared.
    """
    from .numeric import numerical_ranks

    if not len(samples):
        raise ConfigurationError("empty sample set")
    if band < 1:
        raise ConfigurationError(f"band must be at least 1, got {band:g}")
    z = to_complex(samples.points)
    residuals = pres.residual(z)
    minor_norms = pres.minor_norm(z)
    ranks_rho = numerical_ranks(pres.normalized_jacobian(z, "rho"), rank_tol)
    ranks_phi = numerical_ranks(pres.normalized_jacobian(z, "phi"), rank_tol)

    report = EquivalenceReport(checked=len(samples), tol=tol)
    for idx in range(len(samples)):
        r, s = float(residuals[idx]), float(minor_norms[idx])
        rank_rho, rank_phi = int(ranks_rho[idx]), int(ranks_phi[idx])
        h_on = r <= tol
        minor_on = s <= tol
        if h_on:
            report.on_set += 1
        reason = ""
        if rank_rho != rank_phi:
            reason = "rank mismatch between (G, rho) and (G, phi)"
        elif h_on != minor_on and max(r, s) > tol * band:
            reason = "h vanishes but minors do not" if h_on else "minors vanish but h does not"
        if reason:
            report.violations.append(
                Violation(idx, reason, r, s, rank_rho, rank_phi)
            )
    report.violations.sort(key=lambda v: v.index)
    return report


def smoothness_probe(
    pres: MilnorPresentation,
    samples: SampleCloud,
    tol: float = 1e-8,
    rank_tol: float = 1e-8,
) -> SmoothnessReport:
    from .numeric import numerical_ranks

    if pres.degenerate:
        raise DegeneratePresentation("identically zero presentation")
    if not len(samples):
        return SmoothnessReport(0, {}, 2 * pres.n - 2)
    z = to_complex(samples.points)
    residuals = pres.residual(z)
    above = np.flatnonzero(residuals > tol)
    if len(above):
        idx = int(above[0])
        raise ConfigurationError(
            f"sample {idx} has residual {residuals[idx]:.3g} above tolerance {tol:g}"
        )
    ranks = numerical_ranks(pres.compiled_h.real_jacobian(z), rank_tol)
    histogram: dict[int, int] = {}
    for rank in ranks.tolist():
        histogram[rank] = histogram.get(rank, 0) + 1
    return SmoothnessReport(
        checked=len(samples),
        rank_histogram=dict(sorted(histogram.items())),
        local_dimension=2 * pres.n - 2,
        rank_deficient=[int(i) for i in np.flatnonzero(ranks < 2)],
    )
