"""mOSATS assessment CSV reading and writing.

Schema: header ``video_id, aspect_1..aspect_10, skill_label`` with integer
aspect scores 1-5 and skill labels novice/expert. Comment lines starting
with ``#`` are ignored.
"""

from __future__ import annotations

import csv
from typing import Iterable

from ..stats import MosatsAssessment
from . import InputError

FIELDNAMES = ["video_id"] + [f"aspect_{i}" for i in range(1, 11)] + ["skill_label"]


def read_mosats(path) -> list[MosatsAssessment]:
    out: list[MosatsAssessment] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        filtered = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(filtered)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != FIELDNAMES:
            raise InputError(
                f"{path}: expected header {','.join(FIELDNAMES)}, got {reader.fieldnames}"
            )
        for row_no, row in enumerate(reader, start=2):
            try:
                aspects = tuple(int(row[f"aspect_{i}"]) for i in range(1, 11))
                assessment = MosatsAssessment(
                    video_id=row["video_id"],
                    aspects=aspects,
                    skill_label=row["skill_label"].strip(),
                )
            except (TypeError, ValueError, KeyError) as exc:
                raise InputError(f"{path} row {row_no}: {exc}") from exc
            if assessment.video_id in seen:
                raise InputError(f"{path} row {row_no}: duplicate video {assessment.video_id!r}")
            seen.add(assessment.video_id)
            out.append(assessment)
    if not out:
        raise InputError(f"{path}: no assessments found")
    return out


def write_mosats(path, assessments: Iterable[MosatsAssessment], comments: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for comment in comments or []:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(FIELDNAMES)
        for a in assessments:
            writer.writerow([a.video_id, *a.aspects, a.skill_label])
