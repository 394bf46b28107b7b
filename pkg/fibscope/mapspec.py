# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""Reading and writing mapping specs.

    n = 2
    G1 = z + z^2*w     # aliases z, w, zeta for n <= 3
    rho = 0, 1
    chart1 = phi
    decay1 = 1

Statements are separated by newlines or `;`, `#` starts a comment.
"""

from __future__ import annotations
from typing import *

from fractions import Fraction
from importlib import resources
from pathlib import Path
import re

from .errors import MapSpecError, PolynomialError, SpecSemanticError, SpecSyntaxError
from .expr import MAX_LITERAL_DIGITS, MAX_TERMS, Expr, format_expr, parse_expression, to_poly
from .models import MappingSpec
from .poly import WeightVector, format_poly, format_rational


MAX_N = 16
MAX_DOCUMENT = 4_000_000
SHIPPED = ("broughton", "suspension", "twistsum-zeta", "twistsum-w")

KEY_RE = re.compile(r"^(n|rho|G(?P<g>\d+)|chart(?P<chart>\d+)|decay(?P<decay>\d+))$")
RATIONAL_RE = re.compile(r"^\s*(?P<num>\d+)\s*(/\s*(?P<den>\d+)\s*)?$")


class Statement(NamedTuple):
    key: str
    value: str
    line: int
    column: int  # column of the first character of `value`


def split_statements(text: str) -> Iterator[Statement]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        offset = 0
        for chunk in line.split(";"):
            start = offset
            offset += len(chunk) + 1
            if not chunk.strip():
                continue
            if "=" not in chunk:
                col = start + len(chunk) - len(chunk.lstrip()) + 1
                raise SpecSyntaxError("expected `key = value`", lineno, col)
            key, value = chunk.split("=", 1)
            key_col = start + len(key) - len(key.lstrip()) + 1
            key = key.strip()
            if not KEY_RE.match(key):
                raise SpecSyntaxError(f"unknown key {key!r}", lineno, key_col)
            value_col = start + chunk.index("=") + 2
            yield Statement(key, value, lineno, value_col)


def parse_mapping(text: str) -> MappingSpec:
    """Parse a mapping spec document, raising a positioned MapSpecError."""
    try:
        return _parse_mapping(text)
    except RecursionError:
        raise SpecSemanticError("expression too large") from None


def _parse_mapping(text: str) -> MappingSpec:
    if len(text) > MAX_DOCUMENT:
        raise SpecSemanticError("document too large")
    statements = list(split_statements(text.lstrip("\ufeff")))
    seen: dict[str, Statement] = {}
    for st in statements:
        if st.key in seen:
            raise SpecSemanticError(f"duplicate key {st.key!r}", st.line, st.column)
        seen[st.key] = st

    if "n" not in seen:
        raise SpecSemanticError("missing `n = <int>`")
    n_st = seen["n"]
    n_text = n_st.value.strip()
    if not n_text.isdigit() or len(n_text) > 6:
        raise SpecSyntaxError("n must be an integer", n_st.line, n_st.column)
    n = int(n_text)
    if not 2 <= n <= MAX_N:
        raise SpecSemanticError(f"n must be between 2 and {MAX_N}", n_st.line, n_st.column)

    components = []
    g_keys = sorted(
        (int(KEY_RE.match(k).group("g")), st)  # type: ignore[union-attr]
        for k, st in seen.items()
        if k.startswith("G")
    )
    expected = list(range(1, n))
    if [k for k, _ in g_keys] != expected:
        raise SpecSemanticError(
            f"dimension mismatch: expected components G1..G{n - 1},"
            f" found {', '.join(f'G{k}' for k, _ in g_keys) or 'none'}"
        )
    for _, st in g_keys:
        expr = parse_expression(
            st.value, n, holomorphic=True, line=st.line, column=st.column
        )
        try:
            poly = to_poly(expr, n)
        except SpecSemanticError as e:
            raise SpecSemanticError(e.message, st.line, st.column) from None
        if len(poly) > MAX_TERMS:
            raise SpecSemanticError("expression too large", st.line, st.column)
        components.append(poly)

    if "rho" not in seen:
        raise SpecSemanticError("missing `rho = a1, ..., an`")
    weights = parse_weights(seen["rho"], n)

    chart_keys = sorted(
        (int(KEY_RE.match(k).group("chart")), st)  # type: ignore[union-attr]
        for k, st in seen.items()
        if k.startswith("chart")
    )
    if [k for k, _ in chart_keys] != list(range(1, len(chart_keys) + 1)):
        raise SpecSemanticError("charts must be numbered chart1..chartp")
    charts: list[Expr] = [
        parse_expression(st.value, n, holomorphic=False, line=st.line, column=st.column)
        for _, st in chart_keys
    ]
    decays: list[int | None] = [None] * len(charts)
    for key, st in seen.items():
        if not key.startswith("decay"):
            continue
        j = int(KEY_RE.match(key).group("decay"))  # type: ignore[union-attr]
        if not 1 <= j <= len(charts):
            raise SpecSemanticError(f"{key} has no matching chart{j}", st.line, st.column)
        value = st.value.strip()
        if not value.isdigit() or len(value) > 6:
            raise SpecSyntaxError("decay exponents are integers", st.line, st.column)
        decays[j - 1] = int(value)

    return MappingSpec(
        n=n,
        components=tuple(components),
        weights=weights,
        charts=tuple(charts),
        decay_exponents=tuple(decays) if charts else (),
    )


def parse_weights(st: Statement, n: int) -> WeightVector:
    parts = st.value.split(",")
    if len(parts) != n:
        raise SpecSemanticError(
            f"rho needs {n} weights, got {len(parts)}", st.line, st.column
        )
    values = []
    column = st.column
    for part in parts:
        match = RATIONAL_RE.match(part)
        if not match or len(part) > MAX_LITERAL_DIGITS:
            raise SpecSyntaxError(
                f"weights are nonnegative rationals p or p/q, got {part.strip()!r}",
                st.line,
                column,
            )
        den = int(match.group("den") or 1)
        if not den:
            raise SpecSemanticError("zero denominator in weight", st.line, column)
        values.append(Fraction(int(match.group("num")), den))
        column += len(part) + 1
    try:
        return WeightVector(tuple(values))
    except PolynomialError as e:
        raise SpecSemanticError(f"invalid weights: {e}", st.line, st.column) from None


def format_spec(spec: MappingSpec) -> str:
    lines = [f"n = {spec.n}"]
    for k, p in enumerate(spec.components, 1):
        lines.append(f"G{k} = {format_poly(p)}")
    lines.append("rho = " + ", ".join(format_rational(a) for a in spec.weights.a))
    for j, chart in enumerate(spec.charts, 1):
        lines.append(f"chart{j} = {format_expr(chart)}")
    for j, decay in enumerate(spec.decay_exponents, 1):
        if decay is not None:
            lines.append(f"decay{j} = {decay}")
    return "\n".join(lines) + "\n"


def shipped_text(name: str) -> str:
    return resources.files("fibscope").joinpath("maps", f"{name}.map").read_text("utf8")


def load_mapping(source: str | Path) -> MappingSpec:
    """Parse a mapping file, or one of the shipped examples by bare name."""
    path = Path(source)
    if not path.is_file() and str(source) in SHIPPED:
        return parse_mapping(shipped_text(str(source)))
    if not path.is_file() and path.suffix == ".map" and path.stem in SHIPPED:
        return parse_mapping(shipped_text(path.stem))
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise MapSpecError(f"cannot read {source}: {e.strerror}") from None
    try:
        text = raw.decode("utf8")
    except UnicodeDecodeError as e:
        raise SpecSyntaxError(f"not UTF-8: {e.reason}") from None
    return parse_mapping(text)
