# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""Sampling the Milnor set and estimating what happens at infinity.

Every random draw comes from `numpy.random.default_rng` seeded with
(seed, radius index, attempt index, stream), and attempts are solved in
fixed-size blocks, so results do not depend on the number of workers.
"""

from __future__ import annotations
from typing import *

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
from rich.progress import Progress, TaskID
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist, squareform
import sympy

from . import env
from .errors import ConfigurationError, DegeneratePresentation, SamplingStarved
from .milnor import MilnorPresentation, cofactor_field, milnor_h
from .models import (
    AsymptoticReport,
    Cluster,
    CriticalWitness,
    DifferentialNorm,
    Direction,
    K0Report,
    MappingSpec,
    RadiusDiagnostics,
    RadiusSchedule,
    SampleCloud,
)
from .poly import CompiledGradient, CompiledPoly, MixedPoly, PolyMap, WeightVector, to_complex, to_real


STREAM_MILNOR = 0
STREAM_SPHERE = 1
STREAM_EUCLIDEAN = 2
STREAM_K0 = 3

BLOCK = 64
K0_BLOCK = 512
SLICE_DIM = 3
ARMIJO = 1e-4
MIN_STEP = 2.0 ** -30
DESCENT_ITER = 60
APPROACH_TOL = 1e-4
POLISH_ITER = 20
# Attempts allowed per wanted sample before a radius counts as starved.
ATTEMPT_FACTOR = 16
REPROJECT_ITER = 8
# A contracting cluster may keep this share of the clustering tolerance as
# spread at the largest radius.
SPREAD_FLOOR = 0.1
K0_BOUND = 1e4


def numerical_ranks(matrices: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Numerical rank of each matrix in a (..., r, c) stack, real or complex."""
    matrices = np.asarray(matrices)
    if matrices.size == 0:
        return np.zeros(matrices.shape[:-2], dtype=int)
    s = np.linalg.svd(matrices, compute_uv=False)
    top = s[..., :1]
    return np.sum((s > tol * top) & (top > 0), axis=-1)


def numerical_rank(matrix: np.ndarray, tol: float = 1e-8) -> int:
    """Count of singular values above tol × the largest one; 0 for the zero matrix."""
    return int(numerical_ranks(np.asarray(matrix)[None, ...], tol)[0])


def _worker_count(workers: int) -> int:
    if workers <= 0:
        return env.FIBSCOPE_THREADS
    return max(1, min(workers, env.FIBSCOPE_THREADS))


def _rng(seed: int, radius_index: int, attempt: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, radius_index, attempt, stream])


def damped_newton(
    values: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    y: np.ndarray,
    converged: Callable[[np.ndarray], np.ndarray],
    *,
    max_iter: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Newton with Armijo backtracking on a batch of systems.

    `values` maps (A, k) unknowns to (A, m) residuals, `jacobian` to
    (A, m, k).  Rows that stall are dropped.  Steps are minimum-norm when
    m < k.  Returns the final unknowns
    and a mask of rows that converged.
    """
    y = y.copy()
    active = np.ones(len(y), dtype=bool)
    done = np.zeros(len(y), dtype=bool)
    for _ in range(max_iter):
        done |= active & converged(y)
        active &= ~done
        if not active.any():
            break
        with np.errstate(all="ignore"):
            f = values(y)
            jac = jacobian(y)
            finite = np.isfinite(f).all(axis=-1) & np.isfinite(jac).all(axis=(-2, -1))
            active &= finite
            jac[~finite] = 0
            step = -np.einsum("aij,aj->ai", np.linalg.pinv(jac), np.where(finite[:, None], f, 0))
            merit = 0.5 * np.sum(np.abs(f) ** 2, axis=-1)
        t = np.ones(len(y))
        pending = active.copy()
        while pending.any():
            trial = y + t[:, None] * step
            with np.errstate(all="ignore"):
                m_trial = 0.5 * np.sum(np.abs(values(trial)) ** 2, axis=-1)
            ok = pending & np.isfinite(m_trial) & (m_trial <= (1 - 2 * ARMIJO * t) * merit)
            y[ok] = trial[ok]
            pending &= ~ok
            t[pending] *= 0.5
            stalled = pending & (t < MIN_STEP)
            active &= ~stalled
            pending &= ~stalled
    done |= active & converged(y)
    return y, done


def _collect(
    solve: Callable[[range], np.ndarray],
    budget: int,
    wanted: int,
    *,
    block: int = BLOCK,
    workers: int = 0,
    progress: Progress | None = None,
    task: TaskID | None = None,
) -> tuple[np.ndarray | None, int]:
    """Run attempts in rounds until `wanted` rows are found or the budget is spent."""
    found: list[np.ndarray] = []
    total = 0
    used = 0
    with ThreadPoolExecutor(max_workers=_worker_count(workers)) as pool:
        while used < budget and total < wanted:
            size = min(max(wanted, block), budget - used)
            blocks = [
                range(start, min(start + block, used + size))
                for start in range(used, used + size, block)
            ]
            for chunk, rows in zip(blocks, pool.map(solve, blocks)):
                found.append(rows)
                total += len(rows)
                if progress is not None and task is not None:
                    progress.update(task, advance=len(chunk))
            used += size
    if not total:
        return None, used
    return np.concatenate(found)[:wanted], used


# Newton on the Milnor set.


def _slice_starts(
    dim: int, seed: int, radius_index: int, attempts: range, stream: int
) -> tuple[np.ndarray, np.ndarray]:
    """Unit sphere points and orthonormal slice bases, one per attempt."""
    u0 = np.empty((len(attempts), dim))
    basis = np.empty((len(attempts), dim, SLICE_DIM))
    for row, attempt in enumerate(attempts):
        rng = _rng(seed, radius_index, attempt, stream)
        d = rng.standard_normal(dim)
        u0[row] = d / np.linalg.norm(d)
        basis[row], _ = np.linalg.qr(rng.standard_normal((dim, SLICE_DIM)))
    return u0, basis


def _on_milnor(pres: MilnorPresentation, x: np.ndarray, radius: float, tol: float) -> np.ndarray:
    with np.errstate(all="ignore"):
        residual = pres.residual(to_complex(x))
        off_sphere = np.abs(np.linalg.norm(x, axis=-1) - radius)
    return (residual <= tol) & (off_sphere <= tol * radius)


def _milnor_constraints(pres: MilnorPresentation, radius: float, hscale: np.ndarray):
    """(Re h, Im h, sphere) as functions of u = x / radius.

    Both blocks are dimensionless, so neither dominates the Newton merit
    at large radii.
    """

    def values(u: np.ndarray) -> np.ndarray:
        h = pres.compiled_h(to_complex(radius * u)) / hscale
        sphere = (np.sum(u * u, axis=-1) - 1.0) / 2
        return np.stack([h.real, h.imag, sphere], axis=-1)

    def jacobian(u: np.ndarray) -> np.ndarray:
        jac_h = pres.compiled_h.real_jacobian(to_complex(radius * u))
        jac_h = jac_h * (radius / hscale)[:, None, None]
        return np.concatenate([jac_h, u[:, None, :]], axis=-2)

    return values, jacobian


def _solve_slices(
    pres: MilnorPresentation,
    radius: float,
    u0: np.ndarray,
    basis: np.ndarray,
    tol: float,
    max_iter: int,
) -> np.ndarray:
    """Approach M_G inside the slices, then polish in the full space.

    All iterates live on the unit scale u = x / R.  Slice coordinates lose
    absolute precision of order 1e-16 in every component of u, which small
    coordinates near the set cannot afford; the polish uses minimum-norm
    Gauss-Newton steps on the points themselves.
    """
    hscale = np.maximum(1.0, pres.compiled_h.value.magnitude(to_complex(radius * u0)))
    values, jacobian = _milnor_constraints(pres, radius, hscale)

    def lift(y: np.ndarray) -> np.ndarray:
        return u0 + np.einsum("aij,aj->ai", basis, y)

    y, near = damped_newton(
        lambda y: values(lift(y)),
        lambda y: jacobian(lift(y)) @ basis,
        np.zeros((len(u0), SLICE_DIM)),
        lambda y: _on_milnor(pres, radius * lift(y), radius, max(tol, APPROACH_TOL)),
        max_iter=max_iter,
    )
    values, jacobian = _milnor_constraints(pres, radius, hscale[near])
    u, ok = damped_newton(
        values,
        jacobian,
        lift(y)[near],
        lambda u: _on_milnor(pres, radius * u, radius, tol),
        max_iter=POLISH_ITER,
    )
    return radius * u[ok]


def make_cloud(
    pres: MilnorPresentation, points: np.ndarray, seed: int, band: int, **meta: Any
) -> SampleCloud:
    z = to_complex(points)
    return SampleCloud(
        points=points,
        residuals=pres.residual(z),
        radii=np.linalg.norm(points, axis=-1),
        g_images=pres.g_values(z),
        seed=seed,
        bands=np.full(len(points), band, dtype=int),
        meta=meta,
    )


def newton_on_milnor(
    pres: MilnorPresentation,
    radius: float,
    count: int,
    seed: int,
    *,
    radius_index: int = 0,
    tol: float = 1e-10,
    max_iter: int = 50,
    attempts: int | None = None,
    stream: int = STREAM_MILNOR,
    workers: int = 0,
    progress: Progress | None = None,
    task: TaskID | None = None,
) -> SampleCloud:
    """Up to `count` points of M_G on the sphere |x| = radius.

    Each attempt solves (Re h, Im h, |x|² - R²) = 0 by damped Newton inside
    a random 3-dimensional affine slice through a random sphere point.
    """
    if pres.degenerate:
        raise DegeneratePresentation("identically zero presentation")
    budget = attempts if attempts is not None else ATTEMPT_FACTOR * count
    dim = 2 * pres.n

    def solve(block: range) -> np.ndarray:
        u0, basis = _slice_starts(dim, seed, radius_index, block, stream)
        return _solve_slices(pres, radius, u0, basis, tol, max_iter)

    points, used = _collect(
        solve, budget, count, workers=workers, progress=progress, task=task
    )
    if points is None:
        raise SamplingStarved(radius)
    return make_cloud(
        pres,
        points,
        seed,
        radius_index,
        radius=radius,
        attempts=used,
        successes=len(points),
        tol=tol,
        max_iter=max_iter,
    )


# Descent of |G|² along a constraint manifold.


def _descend(
    g_values: Callable[[np.ndarray], np.ndarray],
    g_jacobian: Callable[[np.ndarray], np.ndarray],
    c_values: Callable[[np.ndarray], np.ndarray],
    c_jacobian: Callable[[np.ndarray], np.ndarray],
    feasible: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    radius: float,
    max_iter: int = DESCENT_ITER,
) -> np.ndarray:
    """Projected gradient descent of |G|² with Gauss-Newton re-projection.

    The first trial step is 2|G|²/|P∇|², exact for a quadratic reaching
    zero; Armijo backtracking from there.  Trial points are only accepted
    when they satisfy `feasible`.
    """
    x = x.copy()
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        with np.errstate(all="ignore"):
            g = g_values(x)
            f = np.sum(g * g, axis=-1)
            grad = 2 * np.einsum("ami,am->ai", g_jacobian(x), g)
            cj = c_jacobian(x)
            tangent = grad - np.einsum(
                "aik,ak->ai", np.linalg.pinv(cj), np.einsum("aki,ai->ak", cj, grad)
            )
            norm2 = np.sum(tangent * tangent, axis=-1)
        active &= np.isfinite(norm2) & (norm2 > 1e-20 * np.sum(grad * grad, axis=-1))
        active &= f > 1e-30
        if not active.any():
            break
        length = np.sqrt(np.where(active, norm2, 1.0))
        t = np.where(active, np.minimum(2 * f / np.where(active, norm2, 1.0), 0.5 * radius / length), 0)
        pending = active.copy()
        while pending.any():
            trial = x - t[:, None] * tangent
            for _ in range(REPROJECT_ITER):
                with np.errstate(all="ignore"):
                    fix = np.einsum("aik,ak->ai", np.linalg.pinv(c_jacobian(trial)), c_values(trial))
                trial = np.where(pending[:, None], trial - fix, trial)
                if feasible(trial)[pending].all():
                    break
            with np.errstate(all="ignore"):
                g_trial = g_values(trial)
                f_trial = np.sum(g_trial * g_trial, axis=-1)
            ok = pending & feasible(trial) & (f_trial <= f - ARMIJO * t * norm2)
            x[ok] = trial[ok]
            pending &= ~ok
            t[pending] *= 0.5
            stalled = pending & (t * np.sqrt(norm2) < MIN_STEP * radius)
            active &= ~stalled
            pending &= ~stalled
    return x


def descend_on_milnor(pres: MilnorPresentation, cloud: SampleCloud, radius: float, tol: float) -> SampleCloud:
    """Slide samples along M_G ∩ S_R towards smaller |G|."""
    if not len(cloud):
        return cloud
    hscale = np.maximum(1.0, pres.compiled_h.value.magnitude(to_complex(cloud.points)))
    values, jacobian = _milnor_constraints(pres, radius, hscale)
    points = _descend(
        lambda x: pres.g_values(to_complex(x)),
        lambda x: pres.g_jacobian(to_complex(x)),
        lambda x: values(x / radius),
        lambda x: jacobian(x / radius) / radius,
        lambda x: _on_milnor(pres, x, radius, tol),
        cloud.points,
        radius,
    )
    band = int(cloud.bands[0]) if len(cloud.bands) else 0
    meta = {**cloud.meta, "descended": True}
    return make_cloud(pres, points, cloud.seed, band, **meta)


def _sphere_constraint(radius: float):
    def values(x: np.ndarray) -> np.ndarray:
        return ((np.sum(x * x, axis=-1) - radius ** 2) / (2 * radius))[:, None]

    def jacobian(x: np.ndarray) -> np.ndarray:
        return (x / radius)[:, None, :]

    return values, jacobian


def descend_on_sphere(
    gradients: Sequence[CompiledGradient], points: np.ndarray, radius: float, tol: float
) -> np.ndarray:
    values, jacobian = _sphere_constraint(radius)
    return _descend(
        lambda x: g_values(gradients, to_complex(x)),
        lambda x: g_jacobian(gradients, to_complex(x)),
        values,
        jacobian,
        lambda x: np.abs(np.linalg.norm(x, axis=-1) - radius) <= tol * radius,
        points,
        radius,
    )


def g_values(gradients: Sequence[CompiledGradient], z: np.ndarray) -> np.ndarray:
    return to_real(np.stack([c(z) for c in gradients], axis=-1))


def g_jacobian(gradients: Sequence[CompiledGradient], z: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real_jacobian(z) for c in gradients], axis=-2)


def complex_jacobian_values(gradients: Sequence[CompiledGradient], z: np.ndarray) -> np.ndarray:
    """D_C G at complex points, shape (..., n-1, n)."""
    return np.stack([np.stack([d(z) for d in c.dz], axis=-1) for c in gradients], axis=-2)


def differential_norm(jac: np.ndarray, norm: DifferentialNorm = "sigma_min") -> np.ndarray:
    """|dG| for a stack of complex Jacobians (..., n-1, n)."""
    if norm == "sigma_min":
        return np.linalg.svd(jac, compute_uv=False)[..., -1]
    if norm == "operator":
        return np.linalg.svd(jac, compute_uv=False)[..., 0]
    if norm == "kuo":
        rows = jac.shape[-2]
        if rows == 1:
            return np.linalg.norm(jac[..., 0, :], axis=-1)
        distances = []
        for i in range(rows):
            row = jac[..., i : i + 1, :]
            others = np.delete(jac, i, axis=-2)
            projected = row @ np.linalg.pinv(others) @ others
            distances.append(np.linalg.norm((row - projected)[..., 0, :], axis=-1))
        return np.min(np.stack(distances, axis=-1), axis=-1)
    raise ConfigurationError(f"unknown differential norm {norm!r}")


# Clustering in the target.


def cluster_images(
    images: np.ndarray, bands: np.ndarray, radii: Sequence[float], tol: float
) -> list[Cluster]:
    """Single-linkage clusters of G-images supported at ≥ 3 radii including the largest.

    A cluster's center is the mean of its points at the largest radius;
    spreads are maximal distances to that center.
    """
    if not len(images):
        return []
    order = np.lexsort(np.column_stack([images, bands]).T[::-1])
    images, bands = images[order], bands[order]
    if len(images) == 1:
        labels = np.ones(1, dtype=int)
    else:
        labels = fcluster(linkage(images, method="single"), t=tol, criterion="distance")
    last = len(radii) - 1
    clusters = []
    for label in np.unique(labels):
        members = labels == label
        present = sorted(set(bands[members].tolist()))
        if len(present) < 3 or present[-1] != last:
            continue
        center = images[members & (bands == last)].mean(axis=0)
        distances = np.linalg.norm(images[members] - center, axis=-1)
        member_bands = bands[members]
        spread_by_radius = {
            float(radii[b]): float(distances[member_bands == b].max()) for b in present
        }
        spread = float(distances.max())
        first, final = spread_by_radius[radii[present[0]]], spread_by_radius[radii[last]]
        contracting = final <= max(first, SPREAD_FLOOR * tol)
        clusters.append(
            Cluster(
                center=center,
                spread=spread,
                radii=tuple(float(radii[b]) for b in present),
                count=int(members.sum()),
                spread_by_radius=spread_by_radius,
                persistent=contracting and spread <= tol,
                contracting=contracting,
            )
        )
    clusters.sort(key=lambda c: tuple(c.center.tolist()))
    return clusters


def _distinct_bands(cloud: SampleCloud) -> list[int]:
    return sorted(set(cloud.bands.tolist()))


# The asymptotic set S_G.


def estimate_asymptotic_set(
    spec: MappingSpec,
    schedule: RadiusSchedule,
    seed: int,
    *,
    cutoff: float = 10.0,
    cluster_tol: float = 1e-2,
    descend: bool = True,
    workers: int = 0,
    progress: Progress | None = None,
) -> AsymptoticReport:
    """Estimate S_G: limits of G along M_G as |x| grows.

    At each radius M_G is sampled, optionally slid towards smaller |G|, and
    the points with |G| ≤ cutoff are kept.  The verdict is "nonempty" when
    a cluster of kept images persists to the largest radius with
    non-growing spread.
    """
    pres = milnor_h(spec.map, spec.weights)
    if pres.degenerate:
        raise DegeneratePresentation("identically zero presentation")
    kept: list[SampleCloud] = []
    diagnostics: list[RadiusDiagnostics] = []
    for index, radius in enumerate(schedule.radii):
        task = None
        if progress is not None:
            task = progress.add_task(
                f"M_G at R={radius:g}", total=ATTEMPT_FACTOR * schedule.samples
            )
        try:
            cloud = newton_on_milnor(
                pres,
                radius,
                schedule.samples,
                seed,
                radius_index=index,
                tol=schedule.newton_tol,
                max_iter=schedule.max_iter,
                workers=workers,
                progress=progress,
                task=task,
            )
        except SamplingStarved:
            diagnostics.append(
                RadiusDiagnostics(radius, ATTEMPT_FACTOR * schedule.samples, 0, 0, starved=True)
            )
            continue
        if descend:
            cloud = descend_on_milnor(pres, cloud, radius, schedule.newton_tol)
        if progress is not None and task is not None:
            progress.update(task, completed=ATTEMPT_FACTOR * schedule.samples)
        bounded = cloud.subset(np.linalg.norm(cloud.g_images, axis=-1) <= cutoff)
        diagnostics.append(
            RadiusDiagnostics(radius, cloud.meta["attempts"], len(cloud), len(bounded))
        )
        kept.append(bounded)

    n = spec.n
    retained = SampleCloud.concatenate(kept, seed, 2 * n, 2 * (n - 1))
    retained.meta.update(cutoff=cutoff, descended=descend)
    report = AsymptoticReport(
        clusters=[],
        verdict="inconclusive",
        diagnostics=diagnostics,
        cloud=retained,
        seed=seed,
        cluster_tol=cluster_tol,
        image_cutoff=cutoff,
    )
    if all(d.starved for d in diagnostics):
        return report
    report.clusters = cluster_images(
        retained.g_images, retained.bands, schedule.radii, cluster_tol
    )
    report.verdict = "nonempty" if any(c.persistent for c in report.clusters) else "empty"
    if len(_distinct_bands(retained)) >= 3:
        report.direction_clusters = tangent_cone_directions(
            retained, cluster_tol, map=spec.map
        )
    return report


# Asymptotic critical values K∞(G).


def estimate_kinf(
    spec: MappingSpec,
    schedule: RadiusSchedule,
    seed: int,
    *,
    norm: DifferentialNorm = "sigma_min",
    asymptotic: AsymptoticReport | None = None,
    cutoff: float = 10.0,
    cluster_tol: float = 1e-2,
    theta: float = 1.0,
    workers: int = 0,
    progress: Progress | None = None,
) -> AsymptoticReport:
    """Estimate K∞(G): limits of G(x) with |x|·|dG(x)| → 0.

    Candidates at the k-th radius come from three pools: the Milnor set of
    the given weights, the Milnor set of the Euclidean weights and free
    sphere points, each slid towards smaller |G|.  They are kept when
    |G| ≤ cutoff and |x|·|dG| ≤ theta·(R₁/R_k)^½.  S_G cluster centers
    without a nearby candidate are reported as inclusion violations.
    """
    if asymptotic is None:
        asymptotic = estimate_asymptotic_set(
            spec, schedule, seed, cutoff=cutoff, cluster_tol=cluster_tol,
            workers=workers, progress=progress,
        )
    g = spec.map
    n = g.n
    gradients = g.compile()
    euclidean = milnor_h(g, WeightVector(tuple(Fraction(1) for _ in range(n))))
    source = asymptotic.cloud or SampleCloud.empty(seed, 2 * n, 2 * (n - 1))
    r1 = schedule.radii[0]

    kept: list[SampleCloud] = []
    diagnostics: list[RadiusDiagnostics] = []
    for index, radius in enumerate(schedule.radii):
        pools = [source.points[source.bands == index]]
        attempts = 0
        if not euclidean.degenerate:
            try:
                cloud = newton_on_milnor(
                    euclidean,
                    radius,
                    schedule.samples,
                    seed,
                    radius_index=index,
                    tol=schedule.newton_tol,
                    max_iter=schedule.max_iter,
                    stream=STREAM_EUCLIDEAN,
                    workers=workers,
                )
                attempts += cloud.meta["attempts"]
                pools.append(descend_on_milnor(euclidean, cloud, radius, schedule.newton_tol).points)
            except SamplingStarved:
                attempts += ATTEMPT_FACTOR * schedule.samples
        starts = np.empty((schedule.samples, 2 * n))
        for attempt in range(schedule.samples):
            d = _rng(seed, index, attempt, STREAM_SPHERE).standard_normal(2 * n)
            starts[attempt] = radius * d / np.linalg.norm(d)
        attempts += schedule.samples
        pools.append(descend_on_sphere(gradients, starts, radius, schedule.newton_tol))

        points = np.concatenate(pools)
        points = points[np.isfinite(points).all(axis=-1)]
        z = to_complex(points)
        images = g_values(gradients, z)
        with np.errstate(all="ignore"):
            scaled = np.linalg.norm(points, axis=-1) * differential_norm(
                complex_jacobian_values(gradients, z), norm
            )
        threshold = theta * (r1 / radius) ** 0.5
        mask = (np.linalg.norm(images, axis=-1) <= cutoff) & (scaled <= threshold)
        diagnostics.append(RadiusDiagnostics(radius, attempts, len(points), int(mask.sum())))
        kept.append(
            SampleCloud(
                points=points[mask],
                residuals=scaled[mask],
                radii=np.linalg.norm(points[mask], axis=-1),
                g_images=images[mask],
                seed=seed,
                bands=np.full(int(mask.sum()), index, dtype=int),
            )
        )

    retained = SampleCloud.concatenate(kept, seed, 2 * n, 2 * (n - 1))
    retained.meta.update(norm=norm, theta=theta, cutoff=cutoff)
    candidates = cluster_images(retained.g_images, retained.bands, schedule.radii, cluster_tol)
    violations = [
        c
        for c in asymptotic.clusters
        if not any(
            np.linalg.norm(c.center - k.center) <= cluster_tol for k in candidates
        )
    ]
    return AsymptoticReport(
        clusters=candidates,
        verdict="nonempty" if candidates else "empty",
        kinf_candidates=candidates,
        inclusion_violations=violations,
        diagnostics=diagnostics,
        cloud=retained,
        seed=seed,
        cluster_tol=cluster_tol,
        image_cutoff=cutoff,
        norm=norm,
    )


# Tangent cone at infinity.


def tangent_cone_directions(
    cloud: SampleCloud,
    tol: float,
    *,
    map: PolyMap | None = None,
    link_tol: float = 5e-2,
) -> list[Direction]:
    """Accumulation directions x/|x| over the two largest radius bands.

    With `map`, each direction λ is tested against the leading forms:
    |Ĝᵢ(λ)| ≤ tol for all i, and flagged when the test fails.
    """
    bands = _distinct_bands(cloud)
    if len(bands) < 3:
        raise ConfigurationError(f"tangent cone needs at least 3 radii, cloud spans {len(bands)}")
    top = cloud.subset(np.isin(cloud.bands, bands[-2:]))
    units = top.points / np.linalg.norm(top.points, axis=-1, keepdims=True)
    units = units[np.lexsort(units.T[::-1])]
    if len(units) == 1:
        labels = np.ones(1, dtype=int)
    else:
        labels = fcluster(linkage(units, method="single"), t=link_tol, criterion="distance")
    leading = []
    if map is not None:
        leading = [CompiledPoly(p.leading_form()) for p in map.components if not p.is_zero()]

    directions = []
    for label in np.unique(labels):
        members = units[labels == label]
        if len(members) > 1:
            medoid = members[np.argmin(squareform(pdist(members)).sum(axis=0))]
        else:
            medoid = members[0]
        residual = None
        flagged = False
        if leading:
            lam = to_complex(medoid)
            residual = max(float(abs(p(lam))) for p in leading)
            flagged = residual > tol
        directions.append(Direction(medoid, len(members), residual, flagged))
    directions.sort(key=lambda d: (-d.weight, tuple(d.vector.tolist())))
    return directions


# Searching for critical points of G.


def _sympy_poly(p: MixedPoly, symbols: Sequence[sympy.Symbol]) -> sympy.Expr:
    """A holomorphic p as a sympy expression in `symbols`."""
    conjugates = sympy.symbols(f"zb1:{p.n + 1}")
    return sympy.expand(p.element.as_expr(*symbols, *conjugates))


def exact_k0_check(v: Sequence[MixedPoly]) -> tuple[bool | None, str]:
    """Resultant test for common zeros of the two cofactors of a map C² → C."""
    if any(p.degree == 0 for p in v):
        return True, "a cofactor is a nonzero constant"
    if any(p.is_zero() for p in v):
        return False, "a cofactor vanishes identically"
    symbols = sympy.symbols("z1 z2")
    p, q = (_sympy_poly(c, symbols) for c in v)
    for s in symbols:
        if sympy.degree(p, s) == 0 and sympy.degree(q, s) == 0:
            continue
        res = sympy.expand(sympy.resultant(p, q, s))
        if res == 0:
            return False, f"the cofactors share a factor (resultant in {s} vanishes)"
        if res.is_number:
            return True, f"resultant in {s} is the nonzero constant {res}"
    return None, "the resultants have roots; the numeric search decides"


def k0_probe(
    g: PolyMap,
    seed: int,
    attempts: int = 1000,
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
    workers: int = 0,
    max_witnesses: int = 10,
) -> K0Report:
    """Search for complex points where every maximal minor of D_C G vanishes."""
    field = cofactor_field(g)
    n = g.n
    report = K0Report(attempts=attempts)
    if n == 2 and all(p.degree <= 8 for p in field.v):
        report.exact_checked = True
        report.exact_inconsistent, report.exact_note = exact_k0_check(field.v)
    elif any(p.degree == 0 for p in field.v):
        report.exact_checked = True
        report.exact_inconsistent = True
        report.exact_note = "a cofactor is a nonzero constant"
    if all(p.is_zero() for p in field.v):
        report.witnesses.append(CriticalWitness(np.zeros(n, dtype=complex), 0.0))
        return report

    values = [p.compile() for p in field.v]
    derivatives = [[p.wirtinger(j).compile() for j in range(1, n + 1)] for p in field.v]

    def residual(z: np.ndarray) -> np.ndarray:
        v = np.stack([c(z) for c in values], axis=-1)
        scale = np.maximum(1.0, sum(c.magnitude(z) for c in values))
        return np.linalg.norm(v, axis=-1) / scale

    def solve(block: range) -> np.ndarray:
        z0 = np.empty((len(block), n), dtype=complex)
        for row, attempt in enumerate(block):
            rng = _rng(seed, 0, attempt, STREAM_K0)
            scale = 10.0 ** rng.uniform(-1, 1)
            z0[row] = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        zscale = np.maximum(1.0, sum(c.magnitude(z0) for c in values))[:, None]

        def f(z: np.ndarray) -> np.ndarray:
            return np.stack([c(z) for c in values], axis=-1) / zscale

        def jac(z: np.ndarray) -> np.ndarray:
            rows = [np.stack([d(z) for d in row], axis=-1) for row in derivatives]
            return np.stack(rows, axis=-2) / zscale[..., None]

        def converged(z: np.ndarray) -> np.ndarray:
            with np.errstate(all="ignore"):
                return (residual(z) <= tol) & (np.linalg.norm(z, axis=-1) <= K0_BOUND)

        z, ok = damped_newton(f, jac, z0, converged, max_iter=max_iter)
        return z[ok]

    found, _ = _collect(solve, attempts, attempts, block=K0_BLOCK, workers=workers)
    if found is not None:
        for z in found:
            if len(report.witnesses) >= max_witnesses:
                break
            if any(np.linalg.norm(z - w.point) <= 1e-6 for w in report.witnesses):
                continue
            report.witnesses.append(CriticalWitness(z, float(residual(z[None, :])[0])))
    return report
