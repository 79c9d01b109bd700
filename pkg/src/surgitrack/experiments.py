"""Fold construction, cross-validated classification and correlation tables.

Folds are built at video level (images of one video never straddle folds)
so that each fold holds approximately the same number of images per
instrument class; the per-fold class rebalancing removes 600 BluntDissector
and 1200 Kerrisons images and duplicates 400 CupForceps and 400
PituitaryRongeurs images, clamped with a warning when a fold has fewer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .classifiers import accuracy as model_accuracy
from .classifiers import train_classifier
from .stats import MosatsAssessment, anova_f_select, pearson

N_FOLDS = 4

# per-fold resampling rule: negative removes, positive duplicates
RESAMPLE_RULES = (
    ("BluntDissector", -600),
    ("Kerrisons", -1200),
    ("CupForceps", 400),
    ("PituitaryRongeurs", 400),
)


class ImageRef(NamedTuple):
    video_id: str
    class_id: str
    index: int


@dataclass(frozen=True)
class FoldSpec:
    assignments: dict[str, int]
    resampled: dict[int, tuple[ImageRef, ...]]
    n_folds: int = N_FOLDS

    def videos_in_fold(self, fold: int) -> list[str]:
        return sorted(v for v, f in self.assignments.items() if f == fold)


def _imbalance(counts: dict[int, dict[str, int]], classes: Sequence[str], n_folds: int) -> float:
    """Sum of squared per-class deviations from the per-fold mean."""
    total = 0.0
    for c in classes:
        per_fold = [counts[f].get(c, 0) for f in range(n_folds)]
        mean = sum(per_fold) / n_folds
        total += sum((v - mean) ** 2 for v in per_fold)
    return total


def fold_class_counts(
    counts: dict[str, dict[str, int]], assignments: dict[str, int], n_folds: int = N_FOLDS
) -> dict[int, dict[str, int]]:
    out: dict[int, dict[str, int]] = {f: {} for f in range(n_folds)}
    for video, fold in assignments.items():
        for c, k in counts[video].items():
            out[fold][c] = out[fold].get(c, 0) + k
    return out


def balance_videos(
    counts: dict[str, dict[str, int]], n_folds: int = N_FOLDS
) -> dict[str, int]:
    """Assign videos to folds minimizing per-class image imbalance.

    Greedy bin-packing by descending total count, then first-improvement
    local search over single moves and pairwise swaps. Deterministic.
    """
    classes = sorted({c for v in counts.values() for c in v})
    videos = sorted(counts, key=lambda v: (-sum(counts[v].values()), v))
    assignments: dict[str, int] = {}
    folds: dict[int, dict[str, int]] = {f: {} for f in range(n_folds)}

    def add(video: str, fold: int, sign: int = 1):
        for c, k in counts[video].items():
            folds[fold][c] = folds[fold].get(c, 0) + sign * k

    for v in videos:
        best_fold, best_j = 0, None
        for f in range(n_folds):
            add(v, f)
            j = _imbalance(folds, classes, n_folds)
            add(v, f, -1)
            if best_j is None or j < best_j:
                best_fold, best_j = f, j
        assignments[v] = best_fold
        add(v, best_fold)

    improved = True
    guard = 0
    while improved and guard < 1000:
        guard += 1
        improved = False
        current = _imbalance(folds, classes, n_folds)
        for v in videos:
            src = assignments[v]
            for f in range(n_folds):
                if f == src:
                    continue
                add(v, src, -1)
                add(v, f)
                j = _imbalance(folds, classes, n_folds)
                if j < current - 1e-9:
                    assignments[v] = f
                    current = j
                    improved = True
                    break
                add(v, f, -1)
                add(v, src)
            if improved:
                break
        if improved:
            continue
        for i, v1 in enumerate(videos):
            for v2 in videos[i + 1 :]:
                f1, f2 = assignments[v1], assignments[v2]
                if f1 == f2:
                    continue
                add(v1, f1, -1), add(v2, f2, -1)
                add(v1, f2), add(v2, f1)
                j = _imbalance(folds, classes, n_folds)
                if j < current - 1e-9:
                    assignments[v1], assignments[v2] = f2, f1
                    current = j
                    improved = True
                    break
                add(v1, f2, -1), add(v2, f1, -1)
                add(v1, f1), add(v2, f2)
            if improved:
                break
    return assignments


def build_folds(
    counts: dict[str, dict[str, int]], seed: int = 0, n_folds: int = N_FOLDS
) -> FoldSpec:
    """Video-level folds plus per-fold resampled image multisets."""
    assignments = balance_videos(counts, n_folds)
    rng = np.random.default_rng(seed)
    resampled: dict[int, tuple[ImageRef, ...]] = {}
    for fold in range(n_folds):
        pool: list[ImageRef] = []
        for video in sorted(v for v, f in assignments.items() if f == fold):
            for class_id in sorted(counts[video]):
                pool.extend(
                    ImageRef(video, class_id, i) for i in range(counts[video][class_id])
                )
        for class_id, amount in RESAMPLE_RULES:
            members = [i for i, ref in enumerate(pool) if ref.class_id == class_id]
            if amount < 0:
                want = -amount
                take = min(want, len(members))
                if take < want:
                    warnings.warn(
                        f"fold {fold}: downsample of {class_id} clamped to {take} "
                        f"(requested {want})"
                    )
                if take:
                    drop = set(
                        rng.choice(np.array(members, dtype=np.int64), size=take, replace=False).tolist()
                    )
                    pool = [ref for i, ref in enumerate(pool) if i not in drop]
            else:
                if not members:
                    warnings.warn(
                        f"fold {fold}: cannot upsample {class_id}, no images present"
                    )
                    continue
                picks = rng.choice(np.array(members, dtype=np.int64), size=amount, replace=True)
                pool.extend(pool[i] for i in picks.tolist())
        resampled[fold] = tuple(pool)
    return FoldSpec(assignments=assignments, resampled=resampled, n_folds=n_folds)


# -- cross-validated classification -------------------------------------------


@dataclass
class CvResult:
    task: str
    kind: str
    mean: float
    std: float  # population std across evaluated folds
    per_fold: list[float | None]
    selected_features: dict[int, list[int]] = field(default_factory=dict)
    skipped_folds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "kind": self.kind,
            "mean": self.mean,
            "std": self.std,
            "per_fold": self.per_fold,
            "selected_features": {str(k): v for k, v in self.selected_features.items()},
            "skipped_folds": self.skipped_folds,
        }


def cross_validate(
    task: str,
    folds: FoldSpec,
    X,
    video_ids: Sequence[str],
    labels,
    kind: str,
    k_features: int = 10,
    seed: int = 0,
    **classifier_params,
) -> CvResult:
    """Leave-one-fold-out accuracy (percent), mean +- population std.

    Feature selection and standardization are fit on the training folds
    only. Folds whose training split holds a single class are skipped with
    a warning.
    """
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(labels)
    vids = list(video_ids)
    if Xa.shape[0] != len(vids) or ya.shape[0] != len(vids):
        raise ValueError("X, labels and video_ids must align")
    fold_of = np.array([folds.assignments[v] for v in vids], dtype=np.int64)
    per_fold: list[float | None] = []
    selected: dict[int, list[int]] = {}
    skipped: list[int] = []
    for f in range(folds.n_folds):
        test = fold_of == f
        train = ~test
        if not test.any():
            per_fold.append(None)
            skipped.append(f)
            warnings.warn(f"fold {f} holds no videos; skipped")
            continue
        train_labels = set(ya[train].tolist())
        if len(train_labels) < 2:
            per_fold.append(None)
            skipped.append(f)
            warnings.warn(f"fold {f}: training split has a single class; skipped")
            continue
        if int(train.sum()) <= len(train_labels):
            per_fold.append(None)
            skipped.append(f)
            warnings.warn(
                f"fold {f}: training split too small for its {len(train_labels)} "
                "classes; skipped"
            )
            continue
        k = min(k_features, Xa.shape[1])
        idx, _ = anova_f_select(Xa[train], ya[train], k)
        selected[f] = list(idx)
        model = train_classifier(
            kind, Xa[train], ya[train], seed=seed, feature_mask=idx, **classifier_params
        )
        per_fold.append(100.0 * model_accuracy(model, Xa[test], ya[test]))
    scored = [v for v in per_fold if v is not None]
    if not scored:
        raise ValueError("every fold was skipped; nothing to score")
    return CvResult(
        task=task,
        kind=kind,
        mean=float(np.mean(scored)),
        std=float(np.std(scored)),
        per_fold=per_fold,
        selected_features=selected,
        skipped_folds=skipped,
    )


def dominant_class_accuracy(labels) -> float:
    """Accuracy (percent) of always predicting the most frequent label."""
    ya = list(labels)
    if not ya:
        raise ValueError("empty label list")
    best = max(ya.count(v) for v in set(ya))
    return 100.0 * best / len(ya)


# -- correlation ---------------------------------------------------------------


def correlation_table(
    metric_codes: Sequence[str],
    metric_matrix,
    assessments: Sequence[MosatsAssessment],
) -> dict[str, dict[str, float]]:
    """Pearson of each metric against each aspect and the summed score.

    Undefined correlations (constant series) surface as NaN rather than 0.
    """
    Xa = np.asarray(metric_matrix, dtype=np.float64)
    if Xa.shape[0] != len(assessments) or Xa.shape[1] != len(metric_codes):
        raise ValueError("metric matrix must be (n_videos, n_metrics) aligned with assessments")
    targets: dict[str, np.ndarray] = {
        f"aspect_{i + 1}": np.array([a.aspects[i] for a in assessments], dtype=np.float64)
        for i in range(10)
    }
    targets["summed"] = np.array([a.summed for a in assessments], dtype=np.float64)
    table: dict[str, dict[str, float]] = {}
    for j, code in enumerate(metric_codes):
        row = {}
        series = Xa[:, j]
        for name, target in targets.items():
            if len(series) < 2:
                row[name] = math.nan
            else:
                row[name] = pearson(series, target)
        table[code] = row
    return table
