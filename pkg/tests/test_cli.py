import io
import json

import numpy as np
import pytest

from surgitrack.cli import main
from surgitrack.io.annotations import ingest_annotations
from surgitrack.io.jsonl import build_header, read_tracks, write_tracks
from surgitrack.io.mosats import write_mosats
from surgitrack.io.synth import generate_dataset
from surgitrack.io.tables import read_metrics_csv, write_metrics_csv
from surgitrack.skill_metrics import SkillMetricVector
from surgitrack.stats import MosatsAssessment
from surgitrack.tracking import TrackHistory, TrackPoint, TrackSet


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "synth"
    generate_dataset(out, n_videos=4, n_expert=2, seed=1, duration_s=10.0,
                     with_annotations=True)
    return out


def test_track_batch_and_header(synth_dir, tmp_path):
    out = tmp_path / "tracks.jsonl"
    rc = main([
        "track", str(synth_dir / "detections.jsonl"), "--out", str(out),
        "--variant", "strongsort", "--detection-interval", "1",
    ])
    assert rc == 0
    tracksets, header = read_tracks(out)
    assert len(tracksets) == 4
    assert header["format"] == "surgitrack-tracks-v1"
    assert header["config"]["variant"] == "strongsort"
    assert header["config"]["detection_interval"] == 1
    assert header["inputs"]
    assert all(v.startswith("sha256:") for v in header["inputs"].values())


def test_track_determinism_bytes(synth_dir, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main([
            "track", str(synth_dir / "detections.jsonl"), "--out", str(out),
            "--detection-interval", "5", "--seed", "0",
        ]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_track_config_file_with_flag_override(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tracker": {"variant": "sort", "max_age": 10}}))
    out = tmp_path / "t.jsonl"
    rc = main([
        "track", str(synth_dir / "detections.jsonl"), "--out", str(out),
        "--config", str(cfg), "--max-age", "20",
    ])
    assert rc == 0
    _, header = read_tracks(out)
    assert header["config"]["variant"] == "sort"
    assert header["config"]["max_age"] == 20


def test_track_stream_mode(synth_dir, capsys, monkeypatch):
    lines = (synth_dir / "detections.jsonl").read_text().splitlines()[:200]
    monkeypatch.setattr("sys.stdin", io.StringIO("\n".join(lines) + "\n"))
    rc = main(["track", "-", "--variant", "sort", "--detection-interval", "1"])
    assert rc == 0
    out_lines = capsys.readouterr().out.strip().splitlines()
    assert "header" in json.loads(out_lines[0])
    assert len(out_lines) == 1 + 200


def test_track_stream_out_of_order_exit_2(monkeypatch, capsys):
    rows = [
        {"video_id": "v", "frame": 3, "class": None},
        {"video_id": "v", "frame": 1, "class": None},
    ]
    monkeypatch.setattr(
        "sys.stdin", io.StringIO("\n".join(json.dumps(r) for r in rows) + "\n")
    )
    rc = main(["track", "-"])
    assert rc == 2


def test_missing_input_exit_1(tmp_path, capsys):
    rc = main(["track", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["track"])  # missing positional input
    assert exc.value.code == 1


def test_evaluate_self_predictions_motp_100(synth_dir, tmp_path):
    gt, summary = ingest_annotations(synth_dir / "annotations")
    tracksets = {}
    for video_id, frames in gt.items():
        tracks = []
        next_id = 1
        for f in frames:
            if f.class_id is None:
                continue
            tracks.append(TrackHistory(next_id, f.class_id, (TrackPoint(f.frame_index, f.box, False),)))
            next_id += 1
        tracksets[video_id] = TrackSet(
            tracks=tuple(tracks),
            transforms={},
            last_frame_index=summary.frame_counts[video_id] - 1,
        )
    tracks_path = tmp_path / "self.jsonl"
    write_tracks(tracks_path, tracksets, build_header({"self": True}, 0))
    out = tmp_path / "eval.json"
    rc = main(["evaluate", str(tracks_path), str(synth_dir / "annotations"), "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["aggregate"]["motp_mean"] == pytest.approx(100.0, abs=1e-9)


def test_evaluate_with_detection_masks(synth_dir, tmp_path):
    # no masks in the synthetic detections: per-class mIoU is 0/None but the
    # pipeline must complete and report background quality
    tracks = tmp_path / "t.jsonl"
    assert main([
        "track", str(synth_dir / "detections.jsonl"), "--out", str(tracks),
        "--detection-interval", "1",
    ]) == 0
    out = tmp_path / "eval.json"
    rc = main([
        "evaluate", str(tracks), str(synth_dir / "annotations"), "--out", str(out),
        "--detections", str(synth_dir / "detections.jsonl"),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    video = next(iter(doc["per_video"].values()))
    assert "miou_per_class" in video


def test_metrics_csv_output(synth_dir, tmp_path):
    tracks = tmp_path / "t.jsonl"
    main(["track", str(synth_dir / "detections.jsonl"), "--out", str(tracks),
          "--detection-interval", "1"])
    out = tmp_path / "metrics.csv"
    rc = main(["metrics", str(tracks), "--out", str(out), "--meta", str(synth_dir / "meta.json")])
    assert rc == 0
    video_ids, matrix = read_metrics_csv(out)
    assert len(video_ids) == 4
    assert matrix.shape == (4, 34)
    meta = json.loads((synth_dir / "meta.json").read_text())
    for row, vid in zip(matrix, video_ids):
        assert row[0] == meta["frame_counts"][vid] / 25.0  # M01


def test_metrics_determinism(synth_dir, tmp_path):
    tracks = tmp_path / "t.jsonl"
    main(["track", str(synth_dir / "detections.jsonl"), "--out", str(tracks),
          "--detection-interval", "1"])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["metrics", str(tracks), "--out", str(out),
                     "--meta", str(synth_dir / "meta.json")]) == 0
    assert a.read_bytes() == b.read_bytes()


def _planted_metrics(tmp_path, n=12):
    rng = np.random.default_rng(0)
    video_ids = [f"v{i:02d}" for i in range(n)]
    rows, assessments = [], []
    for i, vid in enumerate(video_ids):
        expert = i % 3 == 0
        base = rng.normal(0, 0.3, 34)
        if expert:
            base[:8] += 12.0
        rows.append((vid, SkillMetricVector(tuple(base.tolist()))))
        aspects = (5,) * 10 if expert else (2,) * 10
        assessments.append(MosatsAssessment(vid, aspects, "expert" if expert else "novice"))
    metrics = tmp_path / "metrics.csv"
    mosats = tmp_path / "mosats.csv"
    write_metrics_csv(metrics, rows, {"seed": 0})
    write_mosats(mosats, assessments)
    return metrics, mosats


def test_classify_on_separable_features(tmp_path):
    metrics, mosats = _planted_metrics(tmp_path)
    out = tmp_path / "cls.json"
    rc = main([
        "classify", str(metrics), str(mosats), "--out", str(out),
        "--task", "binary_skill", "--model", "mlp", "--seed", "0",
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    (result,) = doc["results"]
    assert result["mean"] == 100.0 and result["std"] == 0.0
    assert (tmp_path / "cls.csv").exists()


def test_classify_report_shape_all_models(tmp_path):
    metrics, mosats = _planted_metrics(tmp_path)
    out = tmp_path / "cls.json"
    rc = main(["classify", str(metrics), str(mosats), "--out", str(out), "--seed", "1"])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert len(doc["results"]) == 8  # 4 models x 2 tasks
    kinds = {r["kind"] for r in doc["results"]}
    assert kinds == {"linear", "svm", "rf", "mlp"}
    csv_text = (tmp_path / "cls.csv").read_text()
    assert "binary_skill" in csv_text and "multiclass_mosats" in csv_text


def test_correlate_output(tmp_path):
    metrics, mosats = _planted_metrics(tmp_path)
    out = tmp_path / "corr.csv"
    rc = main(["correlate", str(metrics), str(mosats), "--out", str(out)])
    assert rc == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0].split(",")[0] == "metric"
    assert len(lines) == 1 + 34


def test_folds_from_annotations(synth_dir, tmp_path):
    out = tmp_path / "folds.json"
    rc = main(["folds", str(synth_dir / "annotations"), "--out", str(out), "--seed", "0"])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert set(doc["assignments"]) == {"v01", "v02", "v03", "v04"}
    assert "resampled_sizes" in doc


def test_folds_from_counts_json(tmp_path):
    counts = {"a": {"Kerrisons": 30}, "b": {"Kerrisons": 30},
              "c": {"Kerrisons": 30}, "d": {"Kerrisons": 30}}
    src = tmp_path / "counts.json"
    src.write_text(json.dumps(counts))
    out = tmp_path / "folds.json"
    assert main(["folds", str(src), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert sorted(doc["assignments"].values()) == [0, 1, 2, 3]


def test_bench_json(tmp_path):
    out = tmp_path / "bench.json"
    rc = main(["bench", "--out", str(out), "--frames", "40", "--objects", "2"])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert "python" in doc["backends"]
    row = doc["backends"]["python"]
    assert row["n_frames"] == 40 and row["fps_mean"] > 0


def test_demo_synth_cli(tmp_path):
    out = tmp_path / "demo"
    rc = main(["demo-synth", "--out", str(out), "--videos", "2", "--experts", "1",
               "--duration", "4", "--seed", "5"])
    assert rc == 0
    assert (out / "detections.jsonl").exists()
    assert (out / "mosats.csv").exists()


def test_out_dir_env_override(synth_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("SURGITRACK_OUT_DIR", str(tmp_path / "outputs"))
    rc = main(["track", str(synth_dir / "detections.jsonl"), "--out", "rel.jsonl",
               "--detection-interval", "5"])
    assert rc == 0
    assert (tmp_path / "outputs" / "rel.jsonl").exists()
