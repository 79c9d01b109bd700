"""Throughput comparison of the compiled and pure-Python kernel backends."""

from __future__ import annotations

from ._kernels import available_backends, get_backend
from .io.synth import synthetic_stream
from .mot_eval import fps_benchmark
from .tracking import TrackerConfig


def compare_backends(
    n_frames: int = 2000,
    n_objects: int = 4,
    seed: int = 0,
    detection_interval: int = 1,
    variant: str = "strongsort",
    backends: tuple[str, ...] | None = None,
) -> dict:
    """Run the same synthetic stream through each kernel backend.

    ``detection_interval=1`` exercises the full associate-update path every
    frame, which is the hot loop the compiled kernels accelerate.
    """
    stream = synthetic_stream(n_frames, n_objects=n_objects, seed=seed)
    config = TrackerConfig(variant=variant, detection_interval=detection_interval)
    names = backends if backends is not None else available_backends()
    report: dict = {
        "n_frames": n_frames,
        "n_objects": n_objects,
        "variant": variant,
        "detection_interval": detection_interval,
        "seed": seed,
        "backends": {},
    }
    for name in names:
        fps = fps_benchmark(config, stream, kernels=get_backend(name))
        report["backends"][name] = fps.to_dict()
    if "python" in report["backends"] and "c" in report["backends"]:
        py = report["backends"]["python"]["fps_mean"]
        cc = report["backends"]["c"]["fps_mean"]
        report["speedup_c_over_python"] = cc / py if py > 0 else None
    return report
