# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""The `fibscope` command line.

Configuration is layered: RunConfig defaults, then the `[run]` table of the
TOML file named by FIBSCOPE_CONFIG, then command-line flags.
"""

from __future__ import annotations
from typing import *

import argparse
from dataclasses import fields, replace
from pathlib import Path
import sys

import numpy as np
from rich.markup import escape
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn
import tomli

from . import console, err_console
from . import env
from .certify import certify, embed_vg, leading_rank
from .errors import FibscopeError, SamplingStarved, UsageError
from .export import export_cloud, export_samples, to_document, write_json
from .mapspec import SHIPPED, format_spec, load_mapping
from .milnor import MilnorPresentation, format_presentation, milnor_h, smoothness_probe
from .models import AsymptoticReport, MappingSpec, RadiusSchedule, RunConfig, SampleCloud, VGCloud
from .numeric import ATTEMPT_FACTOR, estimate_asymptotic_set, estimate_kinf, newton_on_milnor
from .store import record_run


print = console.print

Command = Callable[
    [RunConfig, MappingSpec, RadiusSchedule, Path, Progress],
    Tuple[Dict[str, Any], Optional[SampleCloud]],
]

SUBCOMMANDS = {
    "parse": "parse a mapping file and print it in canonical form",
    "milnor": "print the Milnor presentation h and its cofactors",
    "sample": "sample the Milnor set on every radius of the schedule",
    "asymptotic": "estimate the asymptotic set S_G",
    "kinf": "estimate the asymptotic critical values K_inf(G)",
    "leading": "generic rank of the Jacobian of the leading forms",
    "certify": "grade the evidence for G being a fibration",
    "embed": "embed the Milnor samples into V_G and export the cloud",
    "demo": "run the whole pipeline on a shipped example",
}
FILE_KEYS = {f.name for f in fields(RunConfig)} - {"subcommand", "input"}
# Small radii show the part of V_G near the plane at finite distance.
FIGURE_RADII = (1.5, 2.0, 3.0, 5.0, 10.0)
FIGURE_EXTENT = 2.0


def main() -> int:
    return run(sys.argv[1:])


def run(argv: Sequence[str]) -> int:
    try:
        defaults = load_defaults(Path(env.FIBSCOPE_CONFIG))
        args = make_parser(defaults).parse_args(list(argv))
        config = make_config(args)
        schedule = RadiusSchedule(config.radii, config.samples, config.tol)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except (UsageError, ValueError) as e:
        error(UsageError(str(e)).diagnostic())
        return 2

    try:
        spec = load_mapping(config.input)
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with make_progress() as progress:
            summary, cloud = COMMANDS[config.subcommand](config, spec, schedule, out, progress)
    except FibscopeError as e:
        error(e.diagnostic())
        return 1
    except OSError as e:
        error(f'error: kind={type(e).__name__} message="{e}"')
        return 1

    db = config.db or env.FIBSCOPE_DB
    if db:
        run_id = record_run(db, config, summary, cloud)
        print(f"recorded run {run_id} in {escape(db)}")
    return 0


def error(diagnostic: str) -> None:
    _, _, rest = diagnostic.partition("error: ")
    err_console.print(f"[bold red]error:[/bold red] {escape(rest)}", soft_wrap=True)


def warning(message: str) -> None:
    print(f"[bold yellow]warning:[/bold yellow] {escape(message)}")


def make_progress() -> Progress:
    return Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("[green]{task.completed}/[bold]{task.total}"),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TimeRemainingColumn(),
        console=console,
        transient=True,
    )


# Configuration.


def load_defaults(path: Path) -> RunConfig:
    config = RunConfig(subcommand="")
    if not path.is_file():
        return config
    with path.open("rb") as toml_file:
        table = tomli.load(toml_file).get("run", {})
    if not isinstance(table, dict):
        raise UsageError(f"{path}: [run] must be a table")
    for key, value in table.items():
        name = "formats" if key == "format" else key
        if name not in FILE_KEYS:
            warning(f"{path}: unknown key {key!r} in [run]")
            continue
        if name in ("radii", "formats", "projection"):
            value = tuple(value) if isinstance(value, list) else (value,)
        setattr(config, name, value)
    return config


def _join(values: Iterable[object]) -> str:
    return ",".join(str(v) for v in values)


def radii_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(r) for r in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of radii: {text!r}")


def format_list(text: str) -> tuple[str, ...]:
    formats = tuple(f.strip() for f in text.split(",") if f.strip())
    unknown = [f for f in formats if f not in ("csv", "ply", "svg")]
    if unknown or not formats:
        raise argparse.ArgumentTypeError(f"formats are csv, ply and svg, got {text!r}")
    return formats


def axis_list(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(a) for a in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of axes: {text!r}")


def seed_value(text: str) -> int:
    seed = int(text)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seeds are unsigned 64-bit integers, got {text}")
    return seed


def make_parser(defaults: RunConfig) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=seed_value, default=str(defaults.seed), help="random seed")
    common.add_argument(
        "--radii", type=radii_list, default=_join(defaults.radii),
        help="comma-separated, strictly increasing sampling radii (at least three)",
    )
    common.add_argument(
        "--samples", type=int, default=defaults.samples, help="samples wanted per radius"
    )
    common.add_argument(
        "--tol", type=float, default=defaults.tol, help="Newton tolerance on the relative |h|"
    )
    common.add_argument(
        "--cluster-tol", type=float, default=defaults.cluster_tol,
        help="linkage distance for image clusters",
    )
    common.add_argument("--out", default=defaults.out, help="output directory")
    common.add_argument(
        "--format", dest="formats", type=format_list, default=_join(defaults.formats),
        help="comma-separated point cloud formats: csv, ply, svg",
    )
    common.add_argument(
        "--projection", type=axis_list, default=_join(defaults.projection),
        help="three 1-based V_G axes for PLY and SVG output",
    )
    common.add_argument(
        "--ply-encoding", choices=("ascii", "binary"), default=defaults.ply_encoding,
        help="PLY body encoding",
    )
    common.add_argument(
        "--norm", choices=("sigma_min", "operator", "kuo"), default=defaults.norm,
        help="differential norm used for K_inf",
    )
    common.add_argument(
        "--workers", type=int, default=defaults.workers,
        help="worker threads, 0 for FIBSCOPE_THREADS",
    )
    common.add_argument(
        "--db", default=defaults.db, help="sqlite database to record the run in"
    )

    parser = argparse.ArgumentParser(
        prog="fibscope",
        description="Numerical evidence on whether a polynomial map C^n -> C^(n-1)"
        " is a locally trivial fibration.",
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", required=True)
    for name, help in SUBCOMMANDS.items():
        p = sub.add_parser(
            name,
            parents=[common],
            help=help,
            description=help,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        if name == "demo":
            p.add_argument("input", nargs="?", default="broughton", choices=SHIPPED)
        else:
            p.add_argument("input", help="mapping file or shipped example name")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(
        subcommand=args.subcommand,
        input=args.input,
        seed=int(args.seed),
        radii=tuple(args.radii),
        samples=int(args.samples),
        tol=float(args.tol),
        cluster_tol=float(args.cluster_tol),
        out=args.out,
        formats=tuple(args.formats),
        norm=args.norm,
        workers=int(args.workers),
        db=args.db,
        ply_encoding=args.ply_encoding,
        projection=tuple(args.projection),
    )
    if config.projection and len(config.projection) != 3:
        raise UsageError("--projection takes exactly three axes")
    if config.cluster_tol <= 0 or config.tol <= 0:
        raise UsageError("tolerances must be positive")
    if config.workers < 0:
        raise UsageError("--workers must not be negative")
    return config


# Documents.


def report_document(report: AsymptoticReport) -> dict[str, Any]:
    doc = to_document(replace(report, cloud=None))
    doc["retained"] = len(report.cloud) if report.cloud is not None else 0
    return doc


def vg_document(vg: VGCloud) -> dict[str, Any]:
    return {
        "points": len(vg.points),
        "dimension": vg.dimension,
        "chart_count": vg.chart_count,
        "flagged": int(vg.flags.sum()),
        "coverage": vg.coverage,
        "sing_at_infinity": vg.sing_at_infinity,
        "source": vg.source,
    }


def _point(v: np.ndarray) -> str:
    return "(" + ", ".join(f"{x:.4g}" for x in np.asarray(v).tolist()) + ")"


def show_report(report: AsymptoticReport, title: str) -> None:
    print(f"[bold]{title}:[/bold] {report.verdict}")
    for c in report.clusters:
        status = "persistent" if c.persistent else "transient"
        print(
            f"  cluster at {_point(c.center)}: {c.count} points,"
            f" spread {c.spread:.3g}, {status}"
        )
    for d in report.diagnostics:
        if d.starved:
            warning(f"sampling starved at radius {d.radius:g}")


# Subcommands.


def cmd_parse(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    text = format_spec(spec)
    print(text, end="", markup=False, highlight=False)
    write_json(
        out / "spec.json",
        {
            "config": config,
            "n": spec.n,
            "components": spec.components,
            "weights": spec.weights,
            "charts": spec.charts,
            "decay_exponents": spec.decay_exponents,
            "canonical": text,
        },
    )
    return {"n": spec.n}, None


def write_presentation(config: RunConfig, pres: MilnorPresentation, out: Path) -> str:
    text = format_presentation(pres)
    (out / "milnor.txt").write_text(text, encoding="utf8")
    write_json(
        out / "milnor.json",
        {
            "config": config,
            "h": pres.h,
            "cofactors": list(pres.cofactors.v),
            "h_real": list(pres.h_real),
            "degenerate": pres.degenerate,
        },
    )
    return text


def cmd_milnor(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    pres = milnor_h(spec.map, spec.weights)
    print(write_presentation(config, pres, out), end="", markup=False, highlight=False)
    if pres.degenerate:
        warning("h vanishes identically: M_G is all of R^2n")
    return {"degenerate": pres.degenerate}, None


def sample_radii(
    config: RunConfig,
    pres: MilnorPresentation,
    radii: Sequence[float],
    progress: Progress,
    *,
    skip_starved: bool = False,
) -> SampleCloud:
    clouds = []
    for index, radius in enumerate(radii):
        task = progress.add_task(f"M_G at R={radius:g}", total=ATTEMPT_FACTOR * config.samples)
        try:
            clouds.append(
                newton_on_milnor(
                    pres,
                    radius,
                    config.samples,
                    config.seed,
                    radius_index=index,
                    tol=config.tol,
                    workers=config.workers,
                    progress=progress,
                    task=task,
                )
            )
        except SamplingStarved as e:
            if not skip_starved:
                raise
            warning(str(e))
        progress.update(task, completed=ATTEMPT_FACTOR * config.samples)
    return SampleCloud.concatenate(clouds, config.seed, 2 * pres.n, 2 * (pres.n - 1))


def cmd_sample(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    pres = milnor_h(spec.map, spec.weights)
    cloud = sample_radii(config, pres, schedule.radii, progress)
    export_samples(cloud, out / "samples.csv")
    smoothness = smoothness_probe(pres, cloud, tol=config.tol)
    summary = {
        "samples": len(cloud),
        "per_radius": {f"{r:g}": int((cloud.bands == i).sum()) for i, r in enumerate(schedule.radii)},
        "max_residual": float(cloud.residuals.max()) if len(cloud) else None,
        "smoothness": smoothness,
    }
    write_json(out / "samples.json", {"config": config, **summary})
    print(f"{len(cloud)} samples written to {escape(str(out / 'samples.csv'))}")
    if smoothness.rank_deficient:
        warning(f"{len(smoothness.rank_deficient)} samples where dh drops rank")
    return summary, cloud


def cmd_asymptotic(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    report = estimate_asymptotic_set(
        spec, schedule, config.seed, cluster_tol=config.cluster_tol,
        workers=config.workers, progress=progress,
    )
    doc = report_document(report)
    write_json(out / "asymptotic.json", {"config": config, **doc})
    show_report(report, "S_G")
    return {"verdict": report.verdict, "clusters": len(report.clusters)}, report.cloud


def cmd_kinf(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    report = estimate_kinf(
        spec, schedule, config.seed, norm=config.norm, cluster_tol=config.cluster_tol,
        workers=config.workers, progress=progress,
    )
    write_json(out / "kinf.json", {"config": config, **report_document(report)})
    show_report(report, "K_inf")
    for c in report.inclusion_violations:
        warning(f"S_G cluster at {_point(c.center)} has no nearby K_inf candidate")
    return {"verdict": report.verdict, "candidates": len(report.kinf_candidates)}, report.cloud


def cmd_leading(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    rank = leading_rank(spec.map, config.seed)
    write_json(out / "leading.json", {"config": config, **to_document(rank)})
    print(f"leading-form rank {rank.rank}, corank {rank.corank}")
    return {"rank": rank.rank, "corank": rank.corank}, None


def cmd_certify(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    cert = certify(
        spec, schedule, config.seed, cluster_tol=config.cluster_tol,
        workers=config.workers, progress=progress,
    )
    write_json(out / "certificate.json", {"config": config, **to_document(cert)})
    print(f"[bold]{cert.conclusion}[/bold] ({escape(cert.theorem_track)})")
    print(escape(cert.statement))
    for d in cert.diagnostics:
        warning(d)
    return {"conclusion": cert.conclusion, "sg_verdict": cert.sg_verdict}, None


def run_settings(config: RunConfig) -> dict[str, Any]:
    """What it takes to reproduce an exported cloud."""
    return {"input": config.input, "seed": config.seed, "radii": config.radii, "tol": config.tol}


def write_vg(config: RunConfig, vg: VGCloud, out: Path, *, extent: float | None = None) -> None:
    projection = config.projection or None
    for fmt in config.formats:
        export_cloud(
            vg, fmt, out / f"vg.{fmt}", projection,
            encoding=config.ply_encoding, extent=extent, run=run_settings(config),
        )
    write_json(out / "vg.json", {"config": config, **vg_document(vg)})


def cmd_embed(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    report = estimate_asymptotic_set(
        spec, schedule, config.seed, cluster_tol=config.cluster_tol,
        workers=config.workers, progress=progress,
    )
    cloud = report.cloud or SampleCloud.empty(config.seed, 2 * spec.n, 2 * (spec.n - 1))
    vg = embed_vg(spec, cloud, report=report, tol=config.cluster_tol)
    write_vg(config, vg, out)
    print(f"{len(vg.points)} points in V_G, {int(vg.flags.sum())} singular at infinity")
    return {"points": len(vg.points), "flagged": int(vg.flags.sum()), "coverage": vg.coverage}, cloud


def cmd_demo(
    config: RunConfig, spec: MappingSpec, schedule: RadiusSchedule, out: Path, progress: Progress
) -> tuple[dict[str, Any], SampleCloud | None]:
    """milnor.txt, asymptotic.json, kinf.json, certificate.json and the V_G cloud
    in every format."""
    pres = milnor_h(spec.map, spec.weights)
    print(write_presentation(config, pres, out), end="", markup=False, highlight=False)

    report = estimate_asymptotic_set(
        spec, schedule, config.seed, cluster_tol=config.cluster_tol,
        workers=config.workers, progress=progress,
    )
    write_json(out / "asymptotic.json", {"config": config, **report_document(report)})
    show_report(report, "S_G")

    kinf = estimate_kinf(
        spec, schedule, config.seed, norm=config.norm, asymptotic=report,
        cluster_tol=config.cluster_tol, workers=config.workers, progress=progress,
    )
    write_json(out / "kinf.json", {"config": config, **report_document(kinf)})
    show_report(kinf, "K_inf")

    cert = certify(
        spec, schedule, config.seed, cluster_tol=config.cluster_tol,
        asymptotic=report, workers=config.workers, progress=progress,
    )
    write_json(out / "certificate.json", {"config": config, **to_document(cert)})
    print(f"[bold]{cert.conclusion}[/bold] ({escape(cert.theorem_track)})")

    radii = sorted(set(FIGURE_RADII) | set(schedule.radii))
    cloud = sample_radii(config, pres, radii, progress, skip_starved=True)
    vg = embed_vg(spec, cloud, report=report, tol=config.cluster_tol)
    projection = config.projection or (None if vg.dimension == 3 else (1, 2, vg.dimension))
    demo_config = replace(config, formats=("csv", "ply", "svg"), projection=tuple(projection or ()))
    write_vg(demo_config, vg, out, extent=FIGURE_EXTENT)
    print(f"V_G: {len(vg.points)} points, {int(vg.flags.sum())} singular at infinity")
    return {
        "verdict": report.verdict,
        "conclusion": cert.conclusion,
        "flagged": int(vg.flags.sum()),
    }, cloud


COMMANDS: dict[str, Command] = {
    "parse": cmd_parse,
    "milnor": cmd_milnor,
    "sample": cmd_sample,
    "asymptotic": cmd_asymptotic,
    "kinf": cmd_kinf,
    "leading": cmd_leading,
    "certify": cmd_certify,
    "embed": cmd_embed,
    "demo": cmd_demo,
}


if __name__ == "__main__":
    sys.exit(main())
