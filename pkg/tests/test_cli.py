from dataclasses import replace
from fractions import Fraction
import json

import numpy as np
import pytest
from sqlite_utils import Database

from fibscope import cli, env
from fibscope.errors import ProjectionError
from fibscope.export import export_cloud, export_samples, projection_axes
from fibscope.mapspec import SHIPPED, load_mapping
from fibscope.milnor import milnor_h
from fibscope.models import RunConfig, VGCloud
from fibscope.numeric import newton_on_milnor
from fibscope.poly import WeightVector, format_poly
from fibscope.store import record_run


SMALL = ["--radii", "10,100,1000", "--samples", "8"]


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    monkeypatch.setattr(env, "FIBSCOPE_CONFIG", str(tmp_path / "absent.toml"))
    monkeypatch.setattr(env, "FIBSCOPE_DB", "")


def vg_cloud(count=10, dim=4):
    rng = np.random.default_rng(0)
    flags = np.zeros(count, dtype=bool)
    flags[:3] = True
    return VGCloud(
        points=rng.standard_normal((count, dim)),
        chart_count=1,
        radii=np.full(count, 10.0),
        residuals=np.zeros(count),
        flags=flags,
    )


def test_usage_errors(tmp_path):
    assert cli.run(["bogus"]) == 2
    assert cli.run(["sample", "broughton", "--radii", "1,2", "--out", str(tmp_path)]) == 2
    assert cli.run(["sample", "broughton", "--radii", "3,2,1", "--out", str(tmp_path)]) == 2
    assert cli.run(["embed", "broughton", "--projection", "1,2", "--out", str(tmp_path)]) == 2
    assert cli.run(["sample", "broughton", "--seed", "-1", "--out", str(tmp_path)]) == 2


def test_domain_errors_exit_with_one(tmp_path, capsys):
    assert cli.run(["parse", "no/such/file.map", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "kind=MapSpecError" in err

    bad = tmp_path / "bad.map"
    bad.write_text("n = 2\nG1 = z + * w\nrho = 0, 1\n")
    assert cli.run(["parse", str(bad), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "kind=SpecSyntaxError line=2 col=10" in err


def test_parse_writes_canonical_form(tmp_path):
    assert cli.run(["parse", "broughton", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "spec.json").read_text())
    assert doc["n"] == 2
    assert doc["components"] == [format_poly(p) for p in load_mapping("broughton").components]
    assert doc["config"]["subcommand"] == "parse"
    assert "generated_at" in doc


def test_milnor_writes_presentation(tmp_path):
    assert cli.run(["milnor", "broughton", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "milnor.txt").read_text()
    assert text.splitlines()[0] == "h = -4*z1*z2*conj(z2) - 2*conj(z2)"
    doc = json.loads((tmp_path / "milnor.json").read_text())
    assert doc["degenerate"] is False
    assert len(doc["h_real"]) == 2


def test_symbolic_subcommands_on_shipped_examples(tmp_path):
    for name in SHIPPED:
        for sub in ("parse", "milnor", "leading"):
            assert cli.run([sub, name, "--out", str(tmp_path / name)]) == 0, (sub, name)
    doc = json.loads((tmp_path / "suspension" / "leading.json").read_text())
    assert (doc["rank"], doc["corank"]) == (2, 1)


def test_config_file_layering(tmp_path, monkeypatch):
    config = tmp_path / "fibscope.toml"
    config.write_text(
        "[run]\nseed = 7\nsamples = 4\nradii = [10.0, 100.0, 1000.0]\nbogus = 1\n"
    )
    monkeypatch.setattr(env, "FIBSCOPE_CONFIG", str(config))
    out = tmp_path / "out"
    assert cli.run(["sample", "broughton", "--out", str(out)]) == 0
    doc = json.loads((out / "samples.json").read_text())
    assert doc["config"]["seed"] == 7
    assert doc["config"]["radii"] == [10.0, 100.0, 1000.0]
    assert doc["samples"] == 12

    assert cli.run(["sample", "broughton", "--samples", "2", "--out", str(out)]) == 0
    doc = json.loads((out / "samples.json").read_text())
    assert doc["config"]["seed"] == 7
    assert doc["samples"] == 6


def test_samples_are_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.run(["sample", "broughton", *SMALL, "--seed", "3", "--out", str(first)]) == 0
    assert cli.run(["sample", "broughton", *SMALL, "--seed", "3", "--workers", "3", "--out", str(second)]) == 0
    assert (first / "samples.csv").read_bytes() == (second / "samples.csv").read_bytes()
    header = (first / "samples.csv").read_text().splitlines()[0]
    assert header == "x_1,x_2,x_3,x_4,residual,radius,g_1,g_2,band"


def test_certify_and_db(tmp_path):
    db = tmp_path / "runs.db"
    args = ["certify", "broughton", "--radii", "100,1000,10000", "--samples", "64"]
    assert cli.run([*args, "--out", str(tmp_path), "--db", str(db)]) == 0
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["conclusion"] == "obstruction witnessed"
    assert doc["theorem_track"].startswith("n=2")

    assert cli.run(["sample", "broughton", *SMALL, "--out", str(tmp_path), "--db", str(db)]) == 0
    sqlite = Database(db)
    runs = list(sqlite["runs"].rows)
    assert [r["id"] for r in runs] == [1, 2]
    assert [r["subcommand"] for r in runs] == ["certify", "sample"]
    assert json.loads(runs[0]["summary"])["conclusion"] == "obstruction witnessed"
    assert sqlite["samples"].count == 24
    assert {s["run_id"] for s in sqlite["samples"].rows} == {2}


def test_record_run(tmp_path):
    spec = load_mapping("broughton")
    pres = milnor_h(spec.map, spec.weights)
    cloud = newton_on_milnor(pres, 10.0, 16, seed=1)
    db = tmp_path / "runs.db"
    config = RunConfig(subcommand="sample", input="broughton")
    assert record_run(db, config, {"samples": 16}, cloud) == 1
    assert record_run(db, config, {"samples": 0}) == 2
    sqlite = Database(db)
    assert sqlite["samples"].count == 16
    fk = sqlite["samples"].foreign_keys[0]
    assert (fk.column, fk.other_table, fk.other_column) == ("run_id", "runs", "id")
    row = next(iter(sqlite["samples"].rows))
    assert set(row) >= {"run_id", "band", "x_1", "x_4", "radius", "residual", "g_1", "g_2"}
    assert json.loads(next(iter(sqlite["runs"].rows))["config"])["seed"] == 42


def test_projection_axes():
    vg = vg_cloud(dim=4)
    with pytest.raises(ProjectionError):
        projection_axes(vg, None)
    with pytest.raises(ProjectionError):
        projection_axes(vg, (1, 2))
    with pytest.raises(ProjectionError):
        projection_axes(vg, (1, 1, 2))
    with pytest.raises(ProjectionError):
        projection_axes(vg, (1, 2, 5))
    assert projection_axes(vg, (4, 1, 2)) == (3, 0, 1)
    assert projection_axes(vg_cloud(dim=3), None) == (0, 1, 2)


def test_export_csv(tmp_path):
    vg = vg_cloud()
    path = export_cloud(vg, "csv", tmp_path / "vg.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "alpha_1,alpha_2,alpha_3,psi_1,radius,residual,flag_sing_inf"
    assert len(lines) == 11
    assert [line.rsplit(",", 1)[1] for line in lines[1:]] == ["1"] * 3 + ["0"] * 7
    assert float(lines[1].split(",")[0]) == vg.points[0, 0]


def test_export_ply(tmp_path):
    vg = vg_cloud()
    ascii_ply = export_cloud(vg, "ply", tmp_path / "a.ply", (1, 2, 4)).read_bytes()
    head, body = ascii_ply.split(b"end_header\n", 1)
    assert b"format ascii 1.0" in head
    assert b"element vertex 10" in head
    assert b"element sing_at_infinity 3" in head
    assert b"comment axes alpha_1 alpha_2 psi_1" in head
    rows = body.decode().splitlines()
    assert len(rows) == 13
    assert [float(v) for v in rows[0].split()] == vg.points[0, [0, 1, 3]].tolist()

    binary = export_cloud(
        vg, "ply", tmp_path / "b.ply", (1, 2, 4), encoding="binary"
    ).read_bytes()
    head, body = binary.split(b"end_header\n", 1)
    assert b"format binary_little_endian 1.0" in head
    assert len(body) == 13 * 3 * 8
    values = np.frombuffer(body, dtype="<f8").reshape(13, 3)
    assert np.array_equal(values[:10], vg.points[:, [0, 1, 3]])
    assert np.array_equal(values[10:], vg.points[:3][:, [0, 1, 3]])


def test_exports_echo_the_run(tmp_path):
    vg = vg_cloud()
    run = {"input": "broughton", "seed": 7, "radii": (10.0, 100.0, 1000.0), "tol": 1e-10}
    ply = export_cloud(vg, "ply", tmp_path / "a.ply", (1, 2, 4), run=run).read_bytes()
    head = ply.split(b"end_header\n", 1)[0].decode().splitlines()
    assert "comment run seed 7" in head
    assert "comment run radii [10.0, 100.0, 1000.0]" in head
    assert "comment run tol 1e-10" in head
    assert "element vertex 10" in head

    svg = export_cloud(vg, "svg", tmp_path / "a.svg", (1, 2, 4), run=run).read_text()
    assert "seed 7; radii [10.0, 100.0, 1000.0]" in svg


def test_export_svg(tmp_path):
    vg = vg_cloud()
    first = export_cloud(vg, "svg", tmp_path / "a.svg", (1, 2, 4)).read_text()
    second = export_cloud(vg, "svg", tmp_path / "b.svg", (1, 2, 4)).read_text()
    assert first == second
    assert first.lstrip().startswith("<?xml")
    assert 'viewBox="0 0 1000 1000"' in first
    assert 'id="samples"' in first
    assert 'id="sing_at_infinity"' in first
    assert "samples (7)" in first
    assert "singular at infinity (3)" in first
    for name in ("alpha_1", "alpha_2", "psi_1"):
        assert name in first
    assert "<dc:date>" not in first

    clipped = export_cloud(vg, "svg", tmp_path / "c.svg", (1, 2, 4), extent=1e-9).read_text()
    assert 'id="samples"' not in clipped


def test_export_samples(tmp_path):
    spec = load_mapping("twistsum-zeta")
    pres = milnor_h(spec.map, spec.weights)
    cloud = newton_on_milnor(pres, 10.0, 4, seed=1)
    export_samples(cloud, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0].split(",")
    assert header == [f"x_{k}" for k in range(1, 7)] + ["residual", "radius"] + [
        f"g_{k}" for k in range(1, 5)
    ] + ["band"]


def test_demo_broughton(tmp_path):
    out = tmp_path / "demo"
    assert cli.run(["demo", "broughton", "--samples", "64", "--out", str(out)]) == 0
    for name in (
        "milnor.txt",
        "asymptotic.json",
        "kinf.json",
        "certificate.json",
        "vg.csv",
        "vg.ply",
        "vg.svg",
        "vg.json",
    ):
        assert (out / name).is_file(), name

    rows = np.loadtxt(out / "vg.csv", delimiter=",", skiprows=1, ndmin=2)
    xyz, flags = rows[:, :3], rows[:, -1] == 1
    inside = (np.abs(xyz) <= cli.FIGURE_EXTENT).all(axis=-1)
    samples, sing = xyz[inside & ~flags], xyz[inside & flags]
    # The plane w = 0 of the Milnor set maps into the band alpha_3 = 1.
    plane = samples[(samples[:, 2] >= 1 - 1e-9) & (samples[:, 2] <= 1)]
    assert len(plane) > 0
    # The cone 1 + 2zw = 0 converges to the origin.
    assert (np.linalg.norm(samples, axis=-1) <= 1e-2).any()
    assert len(sing) > 0
    assert (np.linalg.norm(sing, axis=-1) <= 1e-2).any()

    svg = (out / "vg.svg").read_text()
    assert f"samples ({len(samples)})" in svg
    assert f"singular at infinity ({len(sing)})" in svg
    assert "comment run seed 42" in (out / "vg.ply").read_text()

    certificate = json.loads((out / "certificate.json").read_text())
    assert certificate["conclusion"] == "obstruction witnessed"


def test_domain_parameter_errors_are_diagnostics(tmp_path, monkeypatch, capsys):
    spec = load_mapping("broughton")
    mismatched = replace(spec, weights=WeightVector((Fraction(1),) * 3))
    monkeypatch.setattr(cli, "load_mapping", lambda name: mismatched)
    assert cli.run(["milnor", "broughton", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "kind=ConfigurationError" in err
    assert "Traceback" not in err
    assert len(err.strip().splitlines()) == 1
