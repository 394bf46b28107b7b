import numpy as np
import pytest

from fibscope.certify import (
    certify,
    chart_values,
    conclude,
    decay_normalize,
    effective_charts,
    embed_vg,
    leading_rank,
    theorem_track,
)
from fibscope.errors import ChartEvaluationError, ConfigurationError
from fibscope.expr import Phi, parse_expression
from fibscope.mapspec import load_mapping, parse_mapping
from fibscope.models import (
    EVIDENCE_FOR_FIBRATION,
    INCONCLUSIVE,
    OBSTRUCTION_WITNESSED,
    AsymptoticReport,
    Cluster,
    CriticalWitness,
    K0Report,
    LeadingRank,
    RadiusSchedule,
)
from fibscope.numeric import estimate_asymptotic_set


SMALL = RadiusSchedule((1e2, 1e3, 1e4), samples=64)


def cluster(center, persistent=True):
    return Cluster(
        center=np.array(center, dtype=float),
        spread=1e-3,
        radii=(1.0, 2.0, 3.0),
        count=10,
        persistent=persistent,
        contracting=persistent,
    )


def test_leading_rank():
    for seed in range(10):
        assert leading_rank(load_mapping("suspension").map, seed).rank == 2
        assert leading_rank(load_mapping("broughton").map, seed).rank == 1
    rank = leading_rank(load_mapping("suspension").map, 0)
    assert rank.corank == 1


def test_theorem_tracks():
    assert theorem_track(2).startswith("n=2")
    assert theorem_track(3) == "n=3 (no rank hypothesis)"
    assert theorem_track(7) == "n>=4 (leading-rank hypothesis)"


def test_conclude_grades():
    clean = K0Report(attempts=10, exact_checked=True, exact_inconsistent=True)
    dirty = K0Report(attempts=10, witnesses=[CriticalWitness(np.zeros(2, dtype=complex), 0.0)])
    empty = AsymptoticReport(clusters=[], verdict="empty")
    full = AsymptoticReport(clusters=[cluster([0.0, 0.0])], verdict="nonempty")
    unknown = AsymptoticReport(clusters=[], verdict="inconclusive")
    rank = LeadingRank(rank=1, corank=1, trials=8)

    cert = conclude(2, clean, rank, empty)
    assert cert.conclusion == EVIDENCE_FOR_FIBRATION
    assert cert.witness is None

    cert = conclude(2, clean, rank, full)
    assert cert.conclusion == OBSTRUCTION_WITNESSED
    assert cert.witness is full.clusters[0]

    cert = conclude(2, dirty, rank, empty)
    assert cert.conclusion == INCONCLUSIVE
    assert any("critical point" in d for d in cert.diagnostics)

    assert conclude(2, clean, rank, unknown).conclusion == INCONCLUSIVE
    assert conclude(2, None, rank, empty).conclusion == INCONCLUSIVE
    assert conclude(2, clean, rank, None).conclusion == INCONCLUSIVE


def test_conclude_is_total():
    rng = np.random.default_rng(5)
    k0_options = [None, K0Report(attempts=1), K0Report(attempts=1, exact_inconsistent=False)]
    verdicts = ["empty", "nonempty", "inconclusive"]
    for _ in range(200):
        n = int(rng.integers(2, 8))
        k0 = k0_options[int(rng.integers(0, 3))]
        rank = LeadingRank(int(rng.integers(0, n + 1)), 0, 8)
        verdict = verdicts[int(rng.integers(0, 3))]
        clusters = [cluster([0.0, 1.0])] if verdict == "nonempty" else []
        cert = conclude(n, k0, rank, AsymptoticReport(clusters=clusters, verdict=verdict))
        assert cert.conclusion in (EVIDENCE_FOR_FIBRATION, OBSTRUCTION_WITNESSED, INCONCLUSIVE)
        if cert.conclusion == EVIDENCE_FOR_FIBRATION:
            assert verdict == "empty" and k0 is not None and k0.found_nothing
        if n >= 4:
            assert cert.hypothesis_met == (rank.rank > n - 3)
        else:
            assert cert.hypothesis_met


def test_certify_broughton():
    cert = certify(load_mapping("broughton"), SMALL, seed=42)
    assert cert.conclusion == OBSTRUCTION_WITNESSED
    assert cert.sg_verdict == "nonempty"
    assert np.linalg.norm(cert.witness.center) <= 1e-2
    assert cert.k0_evidence.exact_inconsistent is True
    assert cert.leading_rank.rank == 1


def test_certify_witnesses_an_obstruction():
    for name in ("suspension", "twistsum-w"):
        cert = certify(load_mapping(name), RadiusSchedule(), seed=42)
        assert cert.conclusion == OBSTRUCTION_WITNESSED, name
        assert cert.sg_verdict == "nonempty"
        assert abs(cert.witness.center[0]) <= 1e-2
        assert not any("starved" in d for d in cert.diagnostics)


def test_certify_twistsum_zeta():
    cert = certify(load_mapping("twistsum-zeta"), RadiusSchedule(), seed=42)
    assert cert.conclusion == EVIDENCE_FOR_FIBRATION
    assert cert.theorem_track == "n=3 (no rank hypothesis)"


def test_decay_normalize():
    chart = parse_expression("z1 + conj(z1)", 2, holomorphic=False)
    normalized = decay_normalize(chart, 1, 2)
    assert normalized.growth == 1
    assert normalized.sufficient
    assert not decay_normalize(chart, 0, 2).sufficient
    assert decay_normalize(chart, 0, 2).expr == chart
    with pytest.raises(ConfigurationError):
        decay_normalize(chart, -1, 2)

    spec = parse_mapping("n = 2\nG1 = z\nrho = 1, 1\nchart1 = z1 + conj(z1)\ndecay1 = 1\n")
    z = np.random.default_rng(1).standard_normal((50, 2)) * 100 + 0j
    raw = (2 * z[:, 0]).real
    values = chart_values(spec, effective_charts(spec), z)[:, 0]
    assert (np.sign(values) == np.sign(raw)).all()
    assert (np.abs(values) < np.abs(raw)).all()


def test_default_chart_is_phi():
    spec = parse_mapping("n = 2\nG1 = z\nrho = 0, 1\n")
    charts = effective_charts(spec)
    assert [c.expr for c in charts] == [Phi()]
    z = np.array([[5.0 + 0j, 1.0 + 1j]])
    assert chart_values(spec, charts, z)[0, 0] == pytest.approx(1 / 3)


def test_chart_errors():
    spec = parse_mapping("n = 2\nG1 = z\nrho = 1, 1\nchart1 = z1\n")
    with pytest.raises(ChartEvaluationError):
        chart_values(spec, effective_charts(spec), np.array([[1j, 0j]]))
    spec = parse_mapping("n = 2\nG1 = z\nrho = 1, 1\nchart1 = 1/(z1*conj(z1))\n")
    with pytest.raises(ChartEvaluationError):
        chart_values(spec, effective_charts(spec), np.array([[0j, 1 + 0j]]))


def test_broughton_embedding():
    spec = load_mapping("broughton")
    report = estimate_asymptotic_set(spec, SMALL, seed=42)
    vg = embed_vg(spec, report.cloud, report=report)
    x = report.cloud.points
    r2 = x[:, 2] ** 2 + x[:, 3] ** 2
    alpha = vg.points
    assert vg.dimension == 3
    assert np.allclose(alpha[:, 0] ** 2 + alpha[:, 1] ** 2, 1 / (16 * r2), rtol=1e-6, atol=0)
    assert np.allclose(alpha[:, 2], 1 / (1 + r2), rtol=1e-6, atol=0)

    # Everything at the largest radius sits over the S_G cluster at the origin.
    assert vg.sing_at_infinity
    for sing in vg.sing_at_infinity:
        assert np.linalg.norm(sing.point) <= 1e-2
        assert sing.contained
    assert vg.coverage == 1.0
    assert vg.source["charts"] == ["phi"]
