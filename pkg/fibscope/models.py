# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

from __future__ import annotations
from typing import *

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .expr import Expr
from .poly import MixedPoly, PolyMap, WeightVector


Verdict = Literal["empty", "nonempty", "inconclusive"]
Grade = Literal["evidence for fibration", "obstruction witnessed", "inconclusive"]
Track = Literal[
    "n=2 (no theorem; inclusion evidence only)",
    "n=3 (no rank hypothesis)",
    "n>=4 (leading-rank hypothesis)",
]
DifferentialNorm = Literal["sigma_min", "operator", "kuo"]
ExportFormat = Literal["csv", "ply", "svg"]

EVIDENCE_FOR_FIBRATION: Grade = "evidence for fibration"
OBSTRUCTION_WITNESSED: Grade = "obstruction witnessed"
INCONCLUSIVE: Grade = "inconclusive"


@dataclass(frozen=True)
class MappingSpec:
    n: int
    components: tuple[MixedPoly, ...]
    weights: WeightVector
    charts: tuple[Expr, ...] = ()
    decay_exponents: tuple[int | None, ...] = ()

    @property
    def map(self) -> PolyMap:
        return PolyMap(self.n, self.components)


@dataclass
class SampleCloud:
    """Finite sample of a subset of R²ⁿ (usually of the Milnor set)."""

    points: np.ndarray  # (N, 2n)
    residuals: np.ndarray  # relative |h| per point
    radii: np.ndarray  # |x| per point
    g_images: np.ndarray  # (N, 2(n-1))
    seed: int
    bands: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.bands) != len(self.points):
            self.bands = np.zeros(len(self.points), dtype=int)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def subset(self, mask: np.ndarray) -> SampleCloud:
        return SampleCloud(
            points=self.points[mask],
            residuals=self.residuals[mask],
            radii=self.radii[mask],
            g_images=self.g_images[mask],
            seed=self.seed,
            bands=self.bands[mask],
            meta=dict(self.meta),
        )

    @classmethod
    def concatenate(cls, clouds: Sequence[SampleCloud], seed: int, dim: int, image_dim: int) -> SampleCloud:
        if not clouds:
            return cls.empty(seed, dim, image_dim)
        return cls(
            points=np.concatenate([c.points for c in clouds]),
            residuals=np.concatenate([c.residuals for c in clouds]),
            radii=np.concatenate([c.radii for c in clouds]),
            g_images=np.concatenate([c.g_images for c in clouds]),
            seed=seed,
            bands=np.concatenate([c.bands for c in clouds]),
            meta={},
        )

    @classmethod
    def empty(cls, seed: int, dim: int, image_dim: int) -> SampleCloud:
        return cls(
            points=np.zeros((0, dim)),
            residuals=np.zeros(0),
            radii=np.zeros(0),
            g_images=np.zeros((0, image_dim)),
            seed=seed,
        )


@dataclass(frozen=True)
class RadiusSchedule:
    radii: tuple[float, ...] = (1e2, 1e3, 1e4, 1e5)
    samples: int = 256
    newton_tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if len(self.radii) < 3:
            raise ConfigurationError("a radius schedule needs at least three radii")
        if any(r <= 0 for r in self.radii):
            raise ConfigurationError("radii must be positive")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ConfigurationError("radii must be strictly increasing")
        if self.samples < 1:
            raise ConfigurationError("the per-radius budget must be at least 1")


@dataclass
class Cluster:
    center: np.ndarray
    spread: float
    radii: tuple[float, ...]  # distinct supporting radii
    count: int
    spread_by_radius: dict[float, float] = field(default_factory=dict)
    persistent: bool = False
    contracting: bool = False


@dataclass
class Direction:
    vector: np.ndarray  # unit vector in R²ⁿ
    weight: int
    leading_residual: float | None = None
    flagged: bool = False


@dataclass
class RadiusDiagnostics:
    radius: float
    attempts: int
    successes: int
    retained: int
    starved: bool = False


@dataclass
class AsymptoticReport:
    clusters: list[Cluster]
    verdict: Verdict
    direction_clusters: list[Direction] = field(default_factory=list)
    kinf_candidates: list[Cluster] = field(default_factory=list)
    inclusion_violations: list[Cluster] = field(default_factory=list)
    diagnostics: list[RadiusDiagnostics] = field(default_factory=list)
    cloud: SampleCloud | None = None
    seed: int = 0
    cluster_tol: float = 1e-2
    image_cutoff: float = 10.0
    norm: DifferentialNorm = "sigma_min"

    @property
    def witness(self) -> Cluster | None:
        persistent = [c for c in self.clusters if c.persistent]
        if not persistent:
            return None
        return min(persistent, key=lambda c: float(np.linalg.norm(c.center)))


@dataclass
class CriticalWitness:
    point: np.ndarray  # complex n-vector
    residual: float


@dataclass
class K0Report:
    attempts: int
    witnesses: list[CriticalWitness] = field(default_factory=list)
    exact_checked: bool = False
    exact_inconsistent: bool | None = None
    exact_note: str = ""

    @property
    def found_nothing(self) -> bool:
        return not self.witnesses and self.exact_inconsistent is not False


@dataclass
class Violation:
    index: int
    reason: str
    h_residual: float
    minor_norm: float
    rank_rho: int
    rank_phi: int


@dataclass
class EquivalenceReport:
    checked: int
    tol: float
    violations: list[Violation] = field(default_factory=list)
    on_set: int = 0

    @property
    def consistent(self) -> bool:
        return not self.violations


@dataclass
class SmoothnessReport:
    checked: int
    rank_histogram: dict[int, int]
    local_dimension: int
    rank_deficient: list[int] = field(default_factory=list)


@dataclass
class LeadingRank:
    rank: int
    corank: int
    trials: int


@dataclass
class Certificate:
    n: int
    k0_evidence: K0Report | None
    leading_rank: LeadingRank | None
    theorem_track: Track
    hypothesis_met: bool
    sg_verdict: Verdict
    conclusion: Grade
    statement: str
    witness: Cluster | None = None
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class NormalizedChart:
    expr: Expr
    exponent: int
    growth: int
    sufficient: bool


@dataclass
class SingAtInfinity:
    index: int  # row in VGCloud.points
    point: np.ndarray
    nearest_center: np.ndarray | None
    distance: float | None
    contained: bool


@dataclass
class VGCloud:
    points: np.ndarray  # (N, 2(n-1) + p)
    chart_count: int
    radii: np.ndarray
    residuals: np.ndarray
    flags: np.ndarray  # bool per point: singular-at-infinity candidate
    sing_at_infinity: list[SingAtInfinity] = field(default_factory=list)
    coverage: float | None = None  # share of S_G centers with a nearby candidate
    source: dict[str, Any] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def image_dim(self) -> int:
        return self.dimension - self.chart_count


@dataclass
class RunConfig:
    subcommand: str
    input: str = ""
    seed: int = 42
    radii: tuple[float, ...] = (1e2, 1e3, 1e4, 1e5)
    samples: int = 256
    tol: float = 1e-10
    cluster_tol: float = 1e-2
    out: str = "fibscope-out"
    formats: tuple[ExportFormat, ...] = ("csv",)
    norm: DifferentialNorm = "sigma_min"
    workers: int = 0
    db: str = ""
    ply_encoding: Literal["ascii", "binary"] = "ascii"
    projection: tuple[int, ...] = ()
