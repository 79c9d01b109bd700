"""Command-line surface: track, evaluate, metrics, correlate, classify,
folds, bench and demo-synth.

Exit codes: 0 success, 1 input error (bad files, bad schema, bad usage),
2 invariant violation (out-of-order frames, domain-rule breakage).
Configuration may come from a JSON file (``--config``), with flags taking
precedence; ``--seed`` controls all randomness. The environment variables
``SURGITRACK_OUT_DIR`` (prefix for relative outputs) and ``SURGITRACK_LOG``
(log level) are honored.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND, available_backends
from .bench import compare_backends
from .experiments import (
    balance_videos,
    build_folds,
    correlation_table,
    cross_validate,
    fold_class_counts,
    FoldSpec,
)
from .io import InputError
from .io.annotations import expand_gt_timeline, ingest_annotations
from .io.jsonl import (
    build_header,
    config_hash,
    file_digest,
    read_detections,
    read_tracks,
    write_tracks,
)
from .io.mosats import read_mosats
from .io.streaming import stream_stdio
from .io.synth import generate_dataset
from .io.tables import (
    read_metrics_csv,
    write_classification_csv,
    write_correlation_csv,
    write_metrics_csv,
)
from .mot_eval import evaluate_tracking, forward_fill_gt, miou
from .skill_metrics import (
    DEFAULT_GAP_TOLERANCE,
    DEFAULT_SMOOTHING_WINDOW,
    METRIC_CODES,
    VideoMeta,
    extract_metrics,
)
from .tracking import Tracker, TrackerConfig

log = logging.getLogger("surgitrack")

MODEL_KINDS = ("linear", "svm", "rf", "mlp")
TASKS = ("multiclass_mosats", "binary_skill")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out_path(path: str) -> Path:
    base = os.environ.get("SURGITRACK_OUT_DIR")
    p = Path(path)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"config {path} must hold a JSON object")
    return data


_TRACKER_FLAGS = (
    "variant",
    "detection_interval",
    "max_age",
    "n_init",
    "gate_iou_min",
    "gate_mahalanobis_max",
    "appearance_weight",
    "ema_alpha",
    "gallery_size",
    "seed",
)


def _tracker_config(args, config_file: dict) -> TrackerConfig:
    merged = dict(config_file.get("tracker", {}))
    for name in _TRACKER_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    try:
        return TrackerConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad tracker configuration: {exc}") from exc


def _add_tracker_flags(sp):
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp.add_argument("--variant", choices=("sort", "deepsort", "strongsort"))
    sp.add_argument("--detection-interval", dest="detection_interval", type=int)
    sp.add_argument("--max-age", dest="max_age", type=int)
    sp.add_argument("--n-init", dest="n_init", type=int)
    sp.add_argument("--gate-iou-min", dest="gate_iou_min", type=float)
    sp.add_argument("--gate-mahalanobis-max", dest="gate_mahalanobis_max", type=float)
    sp.add_argument("--appearance-weight", dest="appearance_weight", type=float)
    sp.add_argument("--ema-alpha", dest="ema_alpha", type=float)
    sp.add_argument("--gallery-size", dest="gallery_size", type=int)
    sp.add_argument("--seed", type=int, default=None)


# -- track ----------------------------------------------------------------------


def cmd_track(args) -> int:
    config_file = _load_config_file(args.config)
    cfg = _tracker_config(args, config_file)
    seed = cfg.seed
    if args.input == "-" or args.stream:
        stats = stream_stdio(cfg, seed=seed)
        log.info("streamed %d frames at %.1f FPS", stats.frames_emitted, stats.fps)
        return 0
    videos = read_detections(args.input)
    tracksets = {}
    for video_id, batches in videos.items():
        tracker = Tracker(cfg)
        for batch in batches:
            tracker.step(batch.frame_index, batch.detections, batch.transform)
        tracksets[video_id] = tracker.trackset()
    header = build_header(
        cfg.to_dict(), seed, {Path(args.input).name: file_digest(args.input)}
    )
    out = _out_path(args.out)
    write_tracks(out, tracksets, header)
    print(f"wrote {out} ({len(tracksets)} video(s))")
    return 0


# -- evaluate --------------------------------------------------------------------


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.std(vals))


def cmd_evaluate(args) -> int:
    tracksets, header = read_tracks(args.tracks)
    gt, summary = ingest_annotations(args.gt)
    det_videos = read_detections(args.detections) if args.detections else None
    per_video = {}
    for video_id in sorted(tracksets):
        if video_id not in gt or not gt[video_id]:
            log.warning("no ground truth for video %s; skipped", video_id)
            continue
        frame_count = summary.frame_counts.get(video_id)
        timeline = expand_gt_timeline(gt[video_id], frame_count)
        filled = forward_fill_gt(timeline)
        report = evaluate_tracking(tracksets[video_id], filled, args.iou_threshold)
        if det_videos is not None and video_id in det_videos:
            pred_frames = {}
            for batch in det_videos[video_id]:
                best = None
                for d in batch.detections:
                    if d.mask is not None and (best is None or d.confidence > best.confidence):
                        best = d
                if best is not None:
                    pred_frames[batch.frame_index] = (best.class_id, best.mask)
            miou_report = miou(pred_frames, gt[video_id], summary.classes)
            report.miou_per_class = {c: miou_report[c] for c in summary.classes}
            report.miou_all = miou_report["AllInstruments"]
            report.miou_background = miou_report["NoInstrument"]
        per_video[video_id] = report.to_dict()
    if not per_video:
        raise InputError("no videos shared between tracks and ground truth")
    mota_mean, mota_std = _mean_std([r["mota"] for r in per_video.values()])
    motp_mean, motp_std = _mean_std([r["motp"] for r in per_video.values()])
    out_doc = {
        "provenance": {
            "tracks": Path(args.tracks).name,
            "tracks_header": header,
            "iou_threshold": args.iou_threshold,
        },
        "per_video": per_video,
        "aggregate": {
            "mota_mean": mota_mean,
            "mota_std": mota_std,
            "motp_mean": motp_mean,
            "motp_std": motp_std,
            "videos": len(per_video),
        },
    }
    out = _out_path(args.out)
    out.write_text(json.dumps(out_doc, indent=2, sort_keys=True) + "\n")
    motp_txt = "n/a" if motp_mean is None else f"{motp_mean:.1f}"
    mota_txt = "n/a" if mota_mean is None else f"{mota_mean:.1f}"
    print(f"wrote {out} (MOTP {motp_txt}, MOTA {mota_txt} over {len(per_video)} video(s))")
    return 0


# -- metrics ----------------------------------------------------------------------


def _frame_counts_from_meta(path: str | None) -> dict[str, int]:
    if not path:
        return {}
    try:
        meta = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read meta file {path}: {exc}") from exc
    return {k: int(v) for k, v in meta.get("frame_counts", {}).items()}


def cmd_metrics(args) -> int:
    tracksets, header = read_tracks(args.tracks)
    frame_counts = _frame_counts_from_meta(args.meta)
    rows = []
    for video_id in sorted(tracksets):
        ts = tracksets[video_id]
        frame_count = args.frames or frame_counts.get(video_id) or ts.frame_count
        if frame_count <= 0:
            raise InputError(
                f"video {video_id}: no frames; pass --frames or --meta with frame counts"
            )
        meta = VideoMeta(video_id, args.fps, frame_count)
        rows.append(
            (
                video_id,
                extract_metrics(
                    ts,
                    meta,
                    gap_tolerance=args.gap_tolerance,
                    smoothing_window=args.smoothing_window,
                ),
            )
        )
    provenance = {
        "source": Path(args.tracks).name,
        "source_digest": file_digest(args.tracks),
        "fps": args.fps,
        "gap_tolerance": args.gap_tolerance,
        "smoothing_window": args.smoothing_window,
    }
    out = _out_path(args.out)
    write_metrics_csv(out, rows, provenance)
    print(f"wrote {out} ({len(rows)} video(s) x {len(METRIC_CODES)} metrics)")
    return 0


# -- correlate ---------------------------------------------------------------------


def _aligned_assessments(video_ids, assessments):
    by_id = {a.video_id: a for a in assessments}
    missing = [v for v in video_ids if v not in by_id]
    if missing:
        raise InputError(f"assessments missing for videos {missing}")
    return [by_id[v] for v in video_ids]


def cmd_correlate(args) -> int:
    video_ids, matrix = read_metrics_csv(args.metrics)
    assessments = _aligned_assessments(video_ids, read_mosats(args.mosats))
    table = correlation_table(METRIC_CODES, matrix, assessments)
    provenance = {
        "metrics": Path(args.metrics).name,
        "metrics_digest": file_digest(args.metrics),
        "mosats": Path(args.mosats).name,
        "mosats_digest": file_digest(args.mosats),
    }
    out = _out_path(args.out)
    write_correlation_csv(out, table, provenance)
    ranked = sorted(
        ((code, row["summed"]) for code, row in table.items()),
        key=lambda kv: -abs(kv[1]) if not math.isnan(kv[1]) else math.inf,
    )
    top = [f"{c}={v:+.2f}" for c, v in ranked[:3] if not math.isnan(v)]
    print(f"wrote {out} (strongest vs summed: {', '.join(top)})")
    return 0


# -- classify -----------------------------------------------------------------------


def _load_foldspec(path: str | None, video_ids: list[str], seed: int) -> FoldSpec:
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read folds file {path}: {exc}") from exc
        assignments = {str(k): int(v) for k, v in data["assignments"].items()}
        missing = [v for v in video_ids if v not in assignments]
        if missing:
            raise InputError(f"folds file lacks assignments for {missing}")
        return FoldSpec(assignments=assignments, resampled={})
    counts = {v: {"images": 1} for v in video_ids}
    return FoldSpec(assignments=balance_videos(counts), resampled={})


def cmd_classify(args) -> int:
    video_ids, matrix = read_metrics_csv(args.metrics)
    assessments = _aligned_assessments(video_ids, read_mosats(args.mosats))
    folds = _load_foldspec(args.folds, video_ids, args.seed)
    tasks = TASKS if args.task == "both" else (args.task,)
    kinds = MODEL_KINDS if args.model == "all" else (args.model,)
    labels = {
        "multiclass_mosats": np.array([a.mean_rounded for a in assessments]),
        "binary_skill": np.array([a.skill_label for a in assessments]),
    }
    results = []
    caught: list[str] = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        for task in tasks:
            for kind in kinds:
                res = cross_validate(
                    task,
                    folds,
                    matrix,
                    video_ids,
                    labels[task],
                    kind,
                    k_features=args.k_features,
                    seed=args.seed,
                )
                results.append(res.to_dict())
        caught = sorted({str(w.message) for w in wlist})
    out_doc = {
        "provenance": {
            "metrics": Path(args.metrics).name,
            "metrics_digest": file_digest(args.metrics),
            "mosats": Path(args.mosats).name,
            "mosats_digest": file_digest(args.mosats),
            "seed": args.seed,
            "k_features": args.k_features,
            "fold_assignments": folds.assignments,
        },
        "results": results,
        "warnings": caught,
    }
    out = _out_path(args.out)
    out.write_text(json.dumps(out_doc, indent=2, sort_keys=True) + "\n")
    csv_out = out.with_suffix(".csv")
    write_classification_csv(
        csv_out, results, {"seed": args.seed, "k_features": args.k_features}
    )
    for r in results:
        print(f"{r['kind']:>6} {r['task']:<18} {r['mean']:5.1f} +- {r['std']:.1f}")
    print(f"wrote {out} and {csv_out}")
    return 0


# -- folds --------------------------------------------------------------------------


def cmd_folds(args) -> int:
    source = Path(args.input)
    if source.is_dir():
        _, summary = ingest_annotations(source)
        counts = summary.per_video
    else:
        try:
            counts = {
                str(v): {str(c): int(n) for c, n in row.items()}
                for v, row in json.loads(source.read_text()).items()
            }
        except (OSError, json.JSONDecodeError, AttributeError, ValueError) as exc:
            raise InputError(f"cannot read counts from {source}: {exc}") from exc
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        spec = build_folds(counts, seed=args.seed)
        caught = [str(w.message) for w in wlist]
    before = fold_class_counts(counts, spec.assignments)
    after: dict[int, dict[str, int]] = {}
    for fold, refs in spec.resampled.items():
        row: dict[str, int] = {}
        for ref in refs:
            row[ref.class_id] = row.get(ref.class_id, 0) + 1
        after[fold] = row
    out_doc = {
        "provenance": {"source": source.name, "seed": args.seed},
        "assignments": spec.assignments,
        "fold_class_counts": {str(f): before[f] for f in sorted(before)},
        "resampled_class_counts": {str(f): after.get(f, {}) for f in sorted(before)},
        "resampled_sizes": {str(f): len(spec.resampled.get(f, ())) for f in sorted(before)},
        "warnings": caught,
    }
    out = _out_path(args.out)
    out.write_text(json.dumps(out_doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({len(spec.assignments)} videos over {spec.n_folds} folds)")
    return 0


# -- bench / demo-synth ----------------------------------------------------------------


def cmd_bench(args) -> int:
    backends = available_backends() if args.backend == "both" else (args.backend,)
    report = compare_backends(
        n_frames=args.frames,
        n_objects=args.objects,
        seed=args.seed,
        detection_interval=args.detection_interval,
        backends=backends,
    )
    out = _out_path(args.out)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, row in report["backends"].items():
        print(
            f"{name:>6}: {row['fps_mean']:8.1f} FPS  "
            f"p50 {row['latency_p50_ms']:.3f} ms  p99 {row['latency_p99_ms']:.3f} ms"
        )
    if "speedup_c_over_python" in report:
        print(f"speedup (c / python): {report['speedup_c_over_python']:.2f}x")
    print(f"wrote {out}")
    return 0


def cmd_demo_synth(args) -> int:
    manifest = generate_dataset(
        _out_path(args.out),
        n_videos=args.videos,
        n_expert=args.experts,
        seed=args.seed,
        fps=args.fps,
        duration_s=args.duration,
        with_annotations=args.with_annotations,
    )
    print(
        f"wrote {args.out}: {len(manifest['videos'])} videos, "
        f"{sum(manifest['frame_counts'].values())} frames"
    )
    return 0


# -- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surgitrack", description=__doc__)
    parser.add_argument("--version", action="version", version=f"surgitrack {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("track", help="turn a detections JSONL into a tracks JSONL")
    sp.add_argument("input", help="detections JSONL path, or - for stdin streaming")
    sp.add_argument("--out", default="tracks.jsonl")
    sp.add_argument("--stream", action="store_true", help="force streaming mode")
    _add_tracker_flags(sp)
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("evaluate", help="MOTA/MOTP (and mIoU) against an annotation bundle")
    sp.add_argument("tracks")
    sp.add_argument("gt", help="annotation bundle directory")
    sp.add_argument("--out", default="evaluation.json")
    sp.add_argument("--iou-threshold", dest="iou_threshold", type=float, default=0.5)
    sp.add_argument("--detections", help="detections JSONL with masks, enables mIoU")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("metrics", help="extract the 34 skill metrics per video")
    sp.add_argument("tracks")
    sp.add_argument("--out", default="metrics.csv")
    sp.add_argument("--fps", type=float, default=25.0)
    sp.add_argument("--frames", type=int, help="frame count override for every video")
    sp.add_argument("--meta", help="meta.json with per-video frame_counts")
    sp.add_argument("--gap-tolerance", dest="gap_tolerance", type=int, default=DEFAULT_GAP_TOLERANCE)
    sp.add_argument(
        "--smoothing-window", dest="smoothing_window", type=int, default=DEFAULT_SMOOTHING_WINDOW
    )
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("correlate", help="Pearson of each metric vs each mOSATS aspect")
    sp.add_argument("metrics")
    sp.add_argument("mosats")
    sp.add_argument("--out", default="correlations.csv")
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("classify", help="cross-validated skill classification")
    sp.add_argument("metrics")
    sp.add_argument("mosats")
    sp.add_argument("--out", default="classification.json")
    sp.add_argument("--task", choices=("both",) + TASKS, default="both")
    sp.add_argument("--model", choices=("all",) + MODEL_KINDS, default="all")
    sp.add_argument("--k-features", dest="k_features", type=int, default=10)
    sp.add_argument("--folds", help="folds JSON (from the folds subcommand)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("folds", help="balanced video-level folds with class rebalancing")
    sp.add_argument("input", help="annotation bundle directory or counts JSON")
    sp.add_argument("--out", default="folds.json")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_folds)

    sp = sub.add_parser("bench", help="compare kernel backends on a synthetic stream")
    sp.add_argument("--out", default="bench.json")
    sp.add_argument("--frames", type=int, default=2000)
    sp.add_argument("--objects", type=int, default=4)
    sp.add_argument("--detection-interval", dest="detection_interval", type=int, default=1)
    sp.add_argument("--backend", choices=("both", "c", "python"), default="both")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("demo-synth", help="generate a synthetic novice/expert dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--videos", type=int, default=15)
    sp.add_argument("--experts", type=int, default=5)
    sp.add_argument("--duration", type=float, default=60.0)
    sp.add_argument("--fps", type=float, default=25.0)
    sp.add_argument("--with-annotations", dest="with_annotations", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_demo_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SURGITRACK_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
