# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""Append CLI runs to an sqlite results database."""

from __future__ import annotations
from typing import *

from dataclasses import asdict
import json
from pathlib import Path

from sqlite_utils import Database
from sqlite_utils.db import Table

from .export import timestamp, to_document
from .models import RunConfig, SampleCloud


def record_run(
    path: str | Path,
    config: RunConfig,
    summary: Mapping[str, Any],
    cloud: SampleCloud | None = None,
) -> int:
    """Insert one row into `runs` and the emitted samples into `samples`.

    Returns the new run id.
    """
    sqlite = Database(path)
    runs_table = sqlite["runs"]
    samples_table = sqlite["samples"]
    assert isinstance(runs_table, Table)
    assert isinstance(samples_table, Table)
    runs_table.insert(
        {
            "id": _max_id(sqlite, "runs") + 1,
            "subcommand": config.subcommand,
            "input": config.input,
            "seed": config.seed,
            "config": json.dumps(to_document(asdict(config)), sort_keys=True),
            "summary": json.dumps(to_document(dict(summary)), sort_keys=True),
            "generated_at": timestamp(),
        },
        pk="id",
        column_order=("id", "subcommand", "input", "seed"),
    )
    run_id = cast(int, runs_table.last_pk)
    if cloud is not None and len(cloud):
        insert_samples(samples_table, run_id, cloud)
        sqlite.index_foreign_keys()
    return run_id


def _max_id(sqlite: Database, table: str) -> int:
    if table not in sqlite.table_names():
        return 0
    row = sqlite.execute(f"select max(id) from [{table}]").fetchone()
    return int(row[0] or 0)


def insert_samples(table: Table, run_id: int, cloud: SampleCloud) -> None:
    fks = [
        ("run_id", "runs", "id"),
    ]
    rows = []
    for i in range(len(cloud)):
        row: dict[str, Any] = {"run_id": run_id, "band": int(cloud.bands[i])}
        row.update({f"x_{k}": float(v) for k, v in enumerate(cloud.points[i], 1)})
        row["radius"] = float(cloud.radii[i])
        row["residual"] = float(cloud.residuals[i])
        row.update({f"g_{k}": float(v) for k, v in enumerate(cloud.g_images[i], 1)})
        rows.append(row)
    table.insert_all(rows, foreign_keys=fks, alter=True)
