# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""Fibration certificates and the embedded variety V_G."""

from __future__ import annotations
from typing import *

import numpy as np
from rich.progress import Progress

from .errors import ChartEvaluationError, ConfigurationError, FibscopeError
from .expr import Expr, Num, Phi, Var, format_expr, evaluate_expr, growth_degree, make_binop, make_conj, make_pow
from .models import (
    EVIDENCE_FOR_FIBRATION,
    INCONCLUSIVE,
    OBSTRUCTION_WITNESSED,
    AsymptoticReport,
    Certificate,
    K0Report,
    LeadingRank,
    MappingSpec,
    NormalizedChart,
    RadiusSchedule,
    SampleCloud,
    SingAtInfinity,
    Track,
    VGCloud,
)
from .numeric import estimate_asymptotic_set, k0_probe, numerical_ranks
from .poly import ONE, CompiledGradient, PolyMap, to_complex


STREAM_LEADING = 4


def leading_rank(g: PolyMap, seed: int, trials: int = 8, tol: float = 1e-8) -> LeadingRank:
    """Generic complex rank of the Jacobian of the leading forms Ĝᵢ."""
    n = g.n
    forms = [CompiledGradient(p.leading_form()) for p in g.components if not p.is_zero()]
    if not forms:
        return LeadingRank(rank=0, corank=n, trials=trials)
    rng = np.random.default_rng([seed, STREAM_LEADING])
    z = rng.standard_normal((trials, n)) + 1j * rng.standard_normal((trials, n))
    jac = np.stack([np.stack([d(z) for d in f.dz], axis=-1) for f in forms], axis=-2)
    rank = int(numerical_ranks(jac, tol).max())
    return LeadingRank(rank=rank, corank=n - rank, trials=trials)


def theorem_track(n: int) -> Track:
    if n == 2:
        return "n=2 (no theorem; inclusion evidence only)"
    if n == 3:
        return "n=3 (no rank hypothesis)"
    return "n>=4 (leading-rank hypothesis)"


def _point(v: np.ndarray) -> str:
    return "(" + ", ".join(f"{x:.3g}" for x in np.asarray(v).tolist()) + ")"


def conclude(
    n: int,
    k0: K0Report | None,
    rank: LeadingRank | None,
    asymptotic: AsymptoticReport | None,
    diagnostics: list[str] | None = None,
) -> Certificate:
    """Grade the evidence.

    B(G) ⊂ S_G for every choice of weights, so an empty S_G estimate
    together with a clean K₀ probe is evidence for B(G) = ∅; a persistent
    S_G cluster is the candidate obstruction.
    """
    diagnostics = list(diagnostics or [])
    track = theorem_track(n)
    if n >= 4:
        hypothesis_met = rank is not None and rank.rank > n - 3
        if rank is not None and not hypothesis_met:
            diagnostics.append(
                f"leading-rank hypothesis not met: rank {rank.rank} <= n-3 = {n - 3}"
            )
    else:
        hypothesis_met = True
    sg_verdict = asymptotic.verdict if asymptotic is not None else "inconclusive"
    k0_clear = k0 is not None and k0.found_nothing
    if k0 is not None and k0.witnesses:
        diagnostics.append(
            f"critical point found near {_point(k0.witnesses[0].point)}: K0(G) is not empty"
        )

    witness = None
    if sg_verdict == "empty" and k0_clear:
        conclusion = EVIDENCE_FOR_FIBRATION
        statement = (
            "evidence for B(G) = ∅ (G a fibration): no persistent S_G cluster at the"
            " sampled radii and no critical point found, and B(G) ⊂ S_G"
        )
    elif sg_verdict == "nonempty" and asymptotic is not None:
        conclusion = OBSTRUCTION_WITNESSED
        witness = asymptotic.witness
        center = _point(witness.center) if witness is not None else "?"
        statement = (
            f"S_G appears nonempty, a cluster persists near α = {center};"
            " since B(G) ⊂ S_G it is the candidate obstruction"
        )
    else:
        conclusion = INCONCLUSIVE
        if sg_verdict == "empty":
            statement = "S_G looks empty but K0(G) = ∅ is not supported by the probe"
        else:
            statement = "no usable S_G estimate"
    return Certificate(
        n=n,
        k0_evidence=k0,
        leading_rank=rank,
        theorem_track=track,
        hypothesis_met=hypothesis_met,
        sg_verdict=sg_verdict,
        conclusion=conclusion,
        statement=statement,
        witness=witness,
        diagnostics=diagnostics,
    )


def certify(
    spec: MappingSpec,
    schedule: RadiusSchedule,
    seed: int,
    *,
    cluster_tol: float = 1e-2,
    k0_attempts: int = 1000,
    leading_trials: int = 8,
    asymptotic: AsymptoticReport | None = None,
    workers: int = 0,
    progress: Progress | None = None,
) -> Certificate:
    """Run the K₀ probe, the leading-rank test and the S_G estimate.

    Failures of the sub-operations are recorded and make the result
    inconclusive.
    """
    diagnostics: list[str] = []
    k0 = rank = None
    try:
        k0 = k0_probe(spec.map, seed, k0_attempts, workers=workers)
    except FibscopeError as e:
        diagnostics.append(e.diagnostic())
    try:
        rank = leading_rank(spec.map, seed, leading_trials)
    except FibscopeError as e:
        diagnostics.append(e.diagnostic())
    if asymptotic is None:
        try:
            asymptotic = estimate_asymptotic_set(
                spec, schedule, seed, cluster_tol=cluster_tol, workers=workers, progress=progress
            )
        except FibscopeError as e:
            diagnostics.append(e.diagnostic())
    for d in asymptotic.diagnostics if asymptotic is not None else ():
        if d.starved:
            diagnostics.append(f"sampling starved at radius {d.radius:g}")
    return conclude(spec.n, k0, rank, asymptotic, diagnostics)


# V_G.


def one_plus_norm2(n: int) -> Expr:
    """The expression 1 + Σ zᵢ·conj(zᵢ)."""
    total: Expr = Num(ONE)
    for i in range(1, n + 1):
        total = make_binop("+", total, make_binop("*", Var(i), make_conj(Var(i))))
    return total


def decay_normalize(chart: Expr, exponent: int, n: int) -> NormalizedChart:
    """ψ / (1 + |x|²)^N, which tends to 0 at infinity when ψ grows slower than |x|^2N."""
    if exponent < 0:
        raise ConfigurationError("decay exponents are nonnegative")
    growth = growth_degree(chart)
    expr = chart
    if exponent:
        expr = make_binop("/", chart, make_pow(one_plus_norm2(n), exponent))
    return NormalizedChart(expr, exponent, growth, growth < 2 * exponent)


def effective_charts(spec: MappingSpec) -> list[NormalizedChart]:
    if not spec.charts:
        return [decay_normalize(Phi(), 0, spec.n)]
    return [
        decay_normalize(chart, decay or 0, spec.n)
        for chart, decay in zip(spec.charts, spec.decay_exponents or [None] * len(spec.charts))
    ]


def chart_values(spec: MappingSpec, charts: Sequence[NormalizedChart], z: np.ndarray) -> np.ndarray:
    """Real chart values (N, p) at complex points (N, n)."""
    z = np.asarray(z, dtype=complex)
    phi = 1.0 / (1.0 + (np.abs(z) ** 2) @ spec.weights.as_floats())
    columns = []
    for j, chart in enumerate(charts, 1):
        values = evaluate_expr(chart.expr, z, phi)
        finite = np.isfinite(values)
        if not finite.all():
            idx = int(np.flatnonzero(~finite)[0])
            raise ChartEvaluationError(f"chart{j} is not finite at sample {idx}")
        imaginary = np.abs(values.imag) > 1e-9 * (1.0 + np.abs(values.real))
        if imaginary.any():
            idx = int(np.flatnonzero(imaginary)[0])
            raise ChartEvaluationError(f"chart{j} is not real at sample {idx}")
        columns.append(values.real)
    return np.stack(columns, axis=-1) if columns else np.zeros((len(z), 0))


def embed_vg(
    spec: MappingSpec,
    cloud: SampleCloud,
    *,
    report: AsymptoticReport | None = None,
    tol: float = 1e-2,
    cutoff: float = 10.0,
) -> VGCloud:
    """Map samples of M_G to (G(x), ψ₁(x), …, ψ_p(x)).

    Points of the largest radius band whose chart block is within `tol` of
    0 and whose image is bounded are candidates for the singular set at
    infinity; each is paired with the nearest S_G cluster center.
    """
    charts = effective_charts(spec)
    z = to_complex(cloud.points)
    psi = chart_values(spec, charts, z)
    images = cloud.g_images
    points = np.hstack([images, psi]) if len(cloud) else np.zeros((0, images.shape[1] + len(charts)))

    flags = np.zeros(len(cloud), dtype=bool)
    if len(cloud):
        top = cloud.bands == cloud.bands.max()
        flags = (
            top
            & (np.linalg.norm(psi, axis=-1) <= tol)
            & (np.linalg.norm(images, axis=-1) <= cutoff)
        )
    centers = [c.center for c in report.clusters] if report is not None else []
    cluster_tol = report.cluster_tol if report is not None else tol

    sing = []
    for idx in np.flatnonzero(flags):
        nearest = distance = None
        if centers:
            gaps = [float(np.linalg.norm(images[idx] - c)) for c in centers]
            k = int(np.argmin(gaps))
            nearest, distance = centers[k], gaps[k]
        sing.append(
            SingAtInfinity(
                index=int(idx),
                point=points[idx],
                nearest_center=nearest,
                distance=distance,
                contained=distance is not None and distance <= cluster_tol,
            )
        )

    coverage = None
    if centers:
        covered = sum(
            1
            for c in centers
            if any(
                s.contained and np.linalg.norm(images[s.index] - c) <= cluster_tol
                for s in sing
            )
        )
        coverage = covered / len(centers)

    return VGCloud(
        points=points,
        chart_count=len(charts),
        radii=cloud.radii,
        residuals=cloud.residuals,
        flags=flags,
        sing_at_infinity=sing,
        coverage=coverage,
        source={
            "seed": cloud.seed,
            "samples": len(cloud),
            "charts": [format_expr(c.expr) for c in charts],
            "decay_sufficient": [c.sufficient for c in charts],
        },
    )
