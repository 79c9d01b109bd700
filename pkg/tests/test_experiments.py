import itertools
import math
import warnings

import numpy as np
import pytest

from surgitrack.experiments import (
    FoldSpec,
    balance_videos,
    build_folds,
    correlation_table,
    cross_validate,
    dominant_class_accuracy,
    fold_class_counts,
    _imbalance,
)
from surgitrack.stats import MosatsAssessment

CLASSES = ("BluntDissector", "CupForceps", "Kerrisons", "PituitaryRongeurs")

# frozen 8-video table whose greedy+swap assignment provably reaches the
# exhaustive 4^8 optimum (asserted below)
EIGHT_VIDEOS = {
    "v0": {"BluntDissector": 26, "CupForceps": 232, "Kerrisons": 196, "PituitaryRongeurs": 131},
    "v1": {"BluntDissector": 129, "CupForceps": 257, "Kerrisons": 25, "PituitaryRongeurs": 209},
    "v2": {"BluntDissector": 60, "CupForceps": 28, "Kerrisons": 157, "PituitaryRongeurs": 292},
    "v3": {"BluntDissector": 220, "CupForceps": 228, "Kerrisons": 215, "PituitaryRongeurs": 235},
    "v4": {"BluntDissector": 153, "CupForceps": 38, "Kerrisons": 251, "PituitaryRongeurs": 135},
    "v5": {"BluntDissector": 150, "CupForceps": 111, "Kerrisons": 54, "PituitaryRongeurs": 278},
    "v6": {"BluntDissector": 234, "CupForceps": 193, "Kerrisons": 120, "PituitaryRongeurs": 246},
    "v7": {"BluntDissector": 163, "CupForceps": 133, "Kerrisons": 135, "PituitaryRongeurs": 68},
}


def brute_force_imbalance(counts, n_folds=4):
    videos = sorted(counts)
    classes = sorted({c for v in counts.values() for c in v})
    best = math.inf
    for assignment in itertools.product(range(n_folds), repeat=len(videos)):
        folds = {f: {} for f in range(n_folds)}
        for v, f in zip(videos, assignment):
            for c, k in counts[v].items():
                folds[f][c] = folds[f].get(c, 0) + k
        best = min(best, _imbalance(folds, classes, n_folds))
    return best


class TestBalanceVideos:
    def test_matches_exhaustive_optimum_on_fixture(self):
        assignments = balance_videos(EIGHT_VIDEOS)
        folds = fold_class_counts(EIGHT_VIDEOS, assignments)
        got = _imbalance(folds, sorted(CLASSES), 4)
        assert got == pytest.approx(brute_force_imbalance(EIGHT_VIDEOS), abs=1e-9)

    def test_each_video_exactly_one_fold(self):
        assignments = balance_videos(EIGHT_VIDEOS)
        assert sorted(assignments) == sorted(EIGHT_VIDEOS)
        assert set(assignments.values()) <= {0, 1, 2, 3}

    def test_identical_videos_spread_evenly(self):
        counts = {f"v{i}": {"Kerrisons": 100} for i in range(4)}
        assignments = balance_videos(counts)
        assert sorted(assignments.values()) == [0, 1, 2, 3]

    def test_deterministic(self):
        assert balance_videos(EIGHT_VIDEOS) == balance_videos(EIGHT_VIDEOS)


class TestBuildFolds:
    def test_deterministic_under_seed(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = build_folds(EIGHT_VIDEOS, seed=5)
            b = build_folds(EIGHT_VIDEOS, seed=5)
        assert a == b

    def test_seed_changes_resampling(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = build_folds(EIGHT_VIDEOS, seed=5)
            b = build_folds(EIGHT_VIDEOS, seed=6)
        assert a.assignments == b.assignments
        assert a.resampled != b.resampled

    def test_no_video_leaks_between_folds(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = build_folds(EIGHT_VIDEOS, seed=0)
        for fold, refs in spec.resampled.items():
            for ref in refs:
                assert spec.assignments[ref.video_id] == fold

    def test_resampling_rule_amounts(self):
        # large counts so nothing clamps: -600 BluntDissector, -1200
        # Kerrisons, +400 CupForceps, +400 PituitaryRongeurs per fold
        counts = {
            f"v{i}": {
                "BluntDissector": 1000,
                "CupForceps": 500,
                "Kerrisons": 2000,
                "PituitaryRongeurs": 500,
            }
            for i in range(4)
        }
        spec = build_folds(counts, seed=1)
        for fold in range(4):
            by_class = {}
            for ref in spec.resampled[fold]:
                by_class[ref.class_id] = by_class.get(ref.class_id, 0) + 1
            assert by_class["BluntDissector"] == 400
            assert by_class["Kerrisons"] == 800
            assert by_class["CupForceps"] == 900
            assert by_class["PituitaryRongeurs"] == 900

    def test_downsample_clamps_with_warning(self):
        counts = {f"v{i}": {"BluntDissector": 10, "CupForceps": 5} for i in range(4)}
        with pytest.warns(UserWarning, match="downsample of BluntDissector clamped"):
            spec = build_folds(counts, seed=0)
        for refs in spec.resampled.values():
            assert not any(r.class_id == "BluntDissector" for r in refs)

    def test_upsample_missing_class_warns(self):
        counts = {f"v{i}": {"BluntDissector": 700} for i in range(4)}
        with pytest.warns(UserWarning, match="cannot upsample CupForceps"):
            build_folds(counts, seed=0)


class TestCrossValidate:
    def _foldspec(self, video_ids):
        return FoldSpec(
            assignments={v: i % 4 for i, v in enumerate(video_ids)}, resampled={}
        )

    def test_perfectly_separable_is_100(self, rng):
        video_ids = [f"v{i:02d}" for i in range(16)]
        labels = np.array(["expert" if i % 2 else "novice" for i in range(16)])
        X = rng.normal(0, 0.5, (16, 34))
        signal = np.where(labels == "expert", 20.0, 0.0)
        for j in (2, 4, 9, 15, 20, 31):
            X[:, j] += signal
        res = cross_validate(
            "binary_skill", self._foldspec(video_ids), X, video_ids, labels, "linear",
            k_features=5, seed=0,
        )
        assert res.mean == 100.0 and res.std == 0.0
        for feats in res.selected_features.values():
            assert set(feats) <= {2, 4, 9, 15, 20, 31}

    def test_single_class_fold_skipped_with_warning(self, rng):
        video_ids = [f"v{i}" for i in range(8)]
        # fold 0 holds the only two experts: training for folds 1..3 is fine,
        # fold 0's training split is all-novice
        assignments = {"v0": 0, "v1": 0, "v2": 1, "v3": 1, "v4": 2, "v5": 2, "v6": 3, "v7": 3}
        labels = np.array(["expert", "expert"] + ["novice"] * 6)
        X = rng.normal(0, 1, (8, 6))
        with pytest.warns(UserWarning, match="single class"):
            res = cross_validate(
                "binary_skill", FoldSpec(assignments=assignments, resampled={}),
                X, video_ids, labels, "linear", k_features=3, seed=0, epochs=50,
            )
        assert res.skipped_folds == [0]
        assert res.per_fold[0] is None

    def test_k_clamped_to_feature_count(self, rng):
        video_ids = [f"v{i}" for i in range(8)]
        labels = np.array(["a", "b"] * 4)
        X = rng.normal(0, 1, (8, 3))
        res = cross_validate(
            "linear" and "binary_skill", self._foldspec(video_ids), X, video_ids,
            labels, "linear", k_features=10, seed=0, epochs=20,
        )
        assert all(len(v) == 3 for v in res.selected_features.values())


def test_dominant_class_accuracy():
    labels = ["novice"] * 10 + ["expert"] * 5
    assert dominant_class_accuracy(labels) == pytest.approx(100 * 10 / 15)


class TestCorrelationTable:
    def test_shape_and_values(self, rng):
        videos = 10
        matrix = rng.normal(0, 1, (videos, 2))
        assessments = []
        for i in range(videos):
            aspects = tuple(int(a) for a in rng.integers(1, 6, 10))
            assessments.append(MosatsAssessment(f"v{i}", aspects, "novice"))
        table = correlation_table(("M01", "M02"), matrix, assessments)
        assert set(table) == {"M01", "M02"}
        assert set(table["M01"]) == {f"aspect_{i}" for i in range(1, 11)} | {"summed"}

    def test_planted_perfect_correlation(self):
        assessments = [
            MosatsAssessment(f"v{i}", (i % 5 + 1,) * 10, "novice") for i in range(5)
        ]
        matrix = np.array([[a.summed] for a in assessments], dtype=float)
        table = correlation_table(("M01",), matrix, assessments)
        assert table["M01"]["summed"] == pytest.approx(1.0, abs=1e-12)

    def test_constant_metric_nan(self):
        assessments = [
            MosatsAssessment(f"v{i}", ((i % 5) + 1,) * 10, "novice") for i in range(4)
        ]
        matrix = np.ones((4, 1))
        table = correlation_table(("M01",), matrix, assessments)
        assert math.isnan(table["M01"]["summed"])
