# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

from __future__ import annotations
from typing import *

import csv
import dataclasses
from datetime import datetime, timezone
from fractions import Fraction
from functools import singledispatch
import json
import math
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure
import numpy as np

from .errors import ConfigurationError, ProjectionError
from .expr import Expr, format_expr
from .models import ExportFormat, SampleCloud, VGCloud
from .poly import (
    Coefficient,
    MixedPoly,
    PolyMap,
    RealPoly,
    WeightVector,
    format_coefficient,
    format_poly,
    format_rational,
    format_real_poly,
)


# Text stays text and element ids do not depend on the process.
SVG_STYLE = {"svg.fonttype": "none", "svg.hashsalt": "fibscope"}
SAMPLE_STYLE = {"s": 4, "c": "#1f77b4", "alpha": 0.6, "depthshade": False}
SING_STYLE = {"s": 30, "c": "#d62728", "edgecolors": "black", "linewidths": 0.5, "depthshade": False}
# 1000 x 1000 user units: matplotlib writes SVG sizes in points.
SVG_INCHES = 1000 / 72
LEGEND = {"samples": "samples", "sing_at_infinity": "singular at infinity"}


# JSON documents.


@singledispatch
def to_document(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_document(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    return obj


@to_document.register
def _doc_dict(obj: dict) -> Any:
    return {str(k): to_document(v) for k, v in obj.items()}


@to_document.register(list)
@to_document.register(tuple)
def _doc_sequence(obj: Sequence[Any]) -> Any:
    return [to_document(v) for v in obj]


@to_document.register
def _doc_array(obj: np.ndarray) -> Any:
    return to_document(obj.tolist())


@to_document.register
def _doc_scalar(obj: np.generic) -> Any:
    return to_document(obj.item())


@to_document.register
def _doc_float(obj: float) -> Any:
    return obj if math.isfinite(obj) else str(obj)


@to_document.register
def _doc_complex(obj: complex) -> Any:
    return [to_document(obj.real), to_document(obj.imag)]


@to_document.register
def _doc_fraction(obj: Fraction) -> Any:
    return format_rational(obj)


@to_document.register
def _doc_coefficient(obj: Coefficient) -> Any:
    return format_coefficient(obj)


@to_document.register
def _doc_mixed(obj: MixedPoly) -> Any:
    return format_poly(obj)


@to_document.register
def _doc_real(obj: RealPoly) -> Any:
    return format_real_poly(obj)


@to_document.register
def _doc_expr(obj: Expr) -> Any:
    return format_expr(obj)


@to_document.register
def _doc_weights(obj: WeightVector) -> Any:
    return [format_rational(a) for a in obj.a]


@to_document.register
def _doc_map(obj: PolyMap) -> Any:
    return [format_poly(p) for p in obj.components]


def timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def write_json(path: Path, document: Mapping[str, Any]) -> None:
    body = {"generated_at": timestamp(), **to_document(dict(document))}
    path.write_text(json.dumps(body, indent=2, ensure_ascii=False) + "\n", encoding="utf8")


# Point clouds.


def _number(v: float) -> str:
    return repr(float(v))


def export_samples(cloud: SampleCloud, path: Path) -> None:
    """Milnor samples: x coordinates, residual, radius, G-image, radius band."""
    dim = cloud.dimension
    image_dim = cloud.g_images.shape[1]
    with path.open("w", newline="", encoding="utf8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            [f"x_{k}" for k in range(1, dim + 1)]
            + ["residual", "radius"]
            + [f"g_{k}" for k in range(1, image_dim + 1)]
            + ["band"]
        )
        for i in range(len(cloud)):
            writer.writerow(
                [_number(v) for v in cloud.points[i]]
                + [_number(cloud.residuals[i]), _number(cloud.radii[i])]
                + [_number(v) for v in cloud.g_images[i]]
                + [int(cloud.bands[i])]
            )


def axis_names(vg: VGCloud) -> list[str]:
    return [f"alpha_{k}" for k in range(1, vg.image_dim + 1)] + [
        f"psi_{j}" for j in range(1, vg.chart_count + 1)
    ]


def projection_axes(vg: VGCloud, projection: Sequence[int] | None) -> tuple[int, int, int]:
    """0-based indices of the three projected axes; `projection` is 1-based."""
    dim = vg.dimension
    if projection is None:
        if dim != 3:
            raise ProjectionError(
                f"a 3-axis projection is required for a {dim}-dimensional cloud"
            )
        return (0, 1, 2)
    axes = tuple(projection)
    if len(axes) != 3 or len(set(axes)) != 3:
        raise ProjectionError(f"projection needs three distinct axes, got {axes}")
    if not all(1 <= a <= dim for a in axes):
        raise ProjectionError(f"projection axes must lie in 1..{dim}, got {axes}")
    return cast(Tuple[int, int, int], tuple(a - 1 for a in axes))


def export_csv(vg: VGCloud, path: Path) -> None:
    with path.open("w", newline="", encoding="utf8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(axis_names(vg) + ["radius", "residual", "flag_sing_inf"])
        for i in range(len(vg.points)):
            writer.writerow(
                [_number(v) for v in vg.points[i]]
                + [_number(vg.radii[i]), _number(vg.residuals[i]), int(vg.flags[i])]
            )


def run_comments(run: Mapping[str, Any] | None) -> list[str]:
    """`key value` lines echoing the run configuration, values as JSON."""
    return [f"{key} {json.dumps(to_document(value))}" for key, value in (run or {}).items()]


def export_ply(
    vg: VGCloud,
    path: Path,
    projection: Sequence[int] | None = None,
    *,
    encoding: Literal["ascii", "binary"] = "ascii",
    run: Mapping[str, Any] | None = None,
) -> None:
    axes = list(projection_axes(vg, projection))
    names = axis_names(vg)
    vertices = vg.points[:, axes] if len(vg.points) else np.zeros((0, 3))
    sing = vertices[vg.flags] if len(vertices) else np.zeros((0, 3))
    fmt = "ascii" if encoding == "ascii" else "binary_little_endian"
    header = [
        "ply",
        f"format {fmt} 1.0",
        "comment fibscope V_G point cloud",
        "comment axes " + " ".join(names[a] for a in axes),
        *(f"comment run {line}" for line in run_comments(run)),
    ]
    for element, rows in (("vertex", vertices), ("sing_at_infinity", sing)):
        header.append(f"element {element} {len(rows)}")
        header.extend(f"property double {c}" for c in "xyz")
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    if encoding == "ascii":
        body = "".join(
            " ".join(_number(v) for v in row) + "\n" for rows in (vertices, sing) for row in rows
        ).encode("ascii")
    else:
        body = b"".join(np.ascontiguousarray(rows, dtype="<f8").tobytes() for rows in (vertices, sing))
    path.write_bytes(head + body)


def export_svg(
    vg: VGCloud,
    path: Path,
    projection: Sequence[int] | None = None,
    *,
    extent: float | None = None,
    run: Mapping[str, Any] | None = None,
) -> None:
    """Orthographic 3d scatter of three axes with axis labels and a legend.

    With `extent`, points with a projected coordinate beyond ±extent are
    left out.  Samples and singular points are drawn as the SVG groups
    "samples" and "sing_at_infinity".
    """
    axes = list(projection_axes(vg, projection))
    names = axis_names(vg)
    xyz = vg.points[:, axes] if len(vg.points) else np.zeros((0, 3))
    flags = vg.flags if len(vg.points) else np.zeros(0, dtype=bool)
    if extent is not None:
        inside = (np.abs(xyz) <= extent).all(axis=-1)
        xyz, flags = xyz[inside], flags[inside]

    with matplotlib.rc_context(SVG_STYLE):
        fig = Figure(figsize=(SVG_INCHES, SVG_INCHES))
        ax = fig.add_subplot(projection="3d", proj_type="ortho")
        for gid, rows, style in (
            ("samples", xyz[~flags], SAMPLE_STYLE),
            ("sing_at_infinity", xyz[flags], SING_STYLE),
        ):
            if not len(rows):
                continue
            label = f"{LEGEND[gid]} ({len(rows)})"
            points = ax.scatter(rows[:, 0], rows[:, 1], rows[:, 2], label=label, **style)
            points.set_gid(gid)
        ax.set_xlabel(names[axes[0]])
        ax.set_ylabel(names[axes[1]])
        ax.set_zlabel(names[axes[2]])
        if extent is not None:
            ax.set_xlim(-extent, extent)
            ax.set_ylim(-extent, extent)
            ax.set_zlim(-extent, extent)
        if len(xyz):
            ax.legend(loc="upper left")
        metadata = {"Date": None, "Title": "fibscope V_G point cloud"}
        if run:
            metadata["Description"] = "; ".join(run_comments(run))
        fig.savefig(path, format="svg", metadata=metadata)


def export_cloud(
    vg: VGCloud,
    fmt: ExportFormat,
    path: Path,
    projection: Sequence[int] | None = None,
    *,
    encoding: Literal["ascii", "binary"] = "ascii",
    extent: float | None = None,
    run: Mapping[str, Any] | None = None,
) -> Path:
    """Write `vg` in `fmt`.  PLY and SVG headers echo `run`; CSV has no header
    room for it and relies on the JSON written next to it."""
    if fmt == "csv":
        export_csv(vg, path)
    elif fmt == "ply":
        export_ply(vg, path, projection, encoding=encoding, run=run)
    elif fmt == "svg":
        export_svg(vg, path, projection, extent=extent, run=run)
    else:
        raise ConfigurationError(f"unknown export format {fmt!r}")
    return path
