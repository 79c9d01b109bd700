"""CSV tables: metric vectors, correlation grids and classification reports.

Every table starts with ``# key=value`` provenance comment lines; readers in
this package skip them.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from ..skill_metrics import METRIC_CODES, METRIC_NAMES, SkillMetricVector
from . import InputError

_METRIC_HEADERS = [f"{code}_{name}" for code, name in METRIC_NAMES]


def provenance_lines(provenance: dict) -> list[str]:
    return [f"# {k}={provenance[k]}" for k in sorted(provenance)]


def write_metrics_csv(path, rows: list[tuple[str, SkillMetricVector]], provenance: dict) -> None:
    with open(path, "w", newline="") as fh:
        for line in provenance_lines(provenance):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["video_id", *_METRIC_HEADERS])
        for video_id, vec in rows:
            writer.writerow([video_id, *[repr(v) for v in vec.values]])


def read_metrics_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        filtered = (line for line in fh if not line.startswith("#"))
        reader = csv.reader(filtered)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty metrics file") from None
        if header != ["video_id", *_METRIC_HEADERS]:
            raise InputError(f"{path}: unexpected metrics header {header[:3]}...")
        video_ids = []
        values = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(METRIC_CODES) + 1:
                raise InputError(f"{path} row {row_no}: expected {len(METRIC_CODES) + 1} cells")
            video_ids.append(row[0])
            try:
                values.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise InputError(f"{path} row {row_no}: {exc}") from exc
    if not video_ids:
        raise InputError(f"{path}: no metric rows")
    return video_ids, np.asarray(values, dtype=np.float64)


def write_correlation_csv(path, table: dict[str, dict[str, float]], provenance: dict) -> None:
    targets = [f"aspect_{i}" for i in range(1, 11)] + ["summed"]
    with open(path, "w", newline="") as fh:
        for line in provenance_lines(provenance):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["metric", *targets])
        for code in METRIC_CODES:
            row = table[code]
            writer.writerow(
                [code]
                + ["" if math.isnan(row[t]) else repr(row[t]) for t in targets]
            )


def write_classification_csv(path, results: list[dict], provenance: dict) -> None:
    """Model x task accuracy grid, mean +- population std per cell."""
    tasks = sorted({r["task"] for r in results})
    kinds = []
    for r in results:
        if r["kind"] not in kinds:
            kinds.append(r["kind"])
    cells = {(r["kind"], r["task"]): r for r in results}
    with open(path, "w", newline="") as fh:
        for line in provenance_lines(provenance):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["model", *tasks])
        for kind in kinds:
            row = [kind]
            for task in tasks:
                r = cells.get((kind, task))
                row.append("" if r is None else f"{r['mean']:.1f}+-{r['std']:.1f}")
            writer.writerow(row)
