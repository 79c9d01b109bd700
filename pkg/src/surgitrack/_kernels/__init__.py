"""Numeric hot-kernel backends.

The compiled Cython extension is preferred when it was built; otherwise the
pure-Python reference implementation is used. Selection happens once at
import time and can be forced with the environment variable
``SURGITRACK_KERNELS=c`` or ``SURGITRACK_KERNELS=python``.

Both backends expose the same functions (see ``pykernels`` for docs); the
``bench`` CLI subcommand compares their throughput.
"""

from __future__ import annotations

import os

from . import pykernels

try:
    from . import _ckern
except ImportError:  # extension not built; pure fallback
    _ckern = None

_requested = os.environ.get("SURGITRACK_KERNELS", "auto").lower()
if _requested == "python":
    _active = pykernels
elif _requested == "c":
    if _ckern is None:
        raise ImportError(
            "SURGITRACK_KERNELS=c requested but the compiled extension is not built"
        )
    _active = _ckern
elif _requested == "auto":
    _active = _ckern if _ckern is not None else pykernels
else:
    raise ValueError(f"unknown SURGITRACK_KERNELS value: {_requested!r}")

BACKEND = _active.NAME

iou_matrix = _active.iou_matrix
rle_intersection = _active.rle_intersection
lap_solve = _active.lap_solve
kf_predict = _active.kf_predict
kf_update = _active.kf_update
kf_gating = _active.kf_gating
gating_matrix = _active.gating_matrix


def available_backends() -> tuple[str, ...]:
    """Names of the backends importable in this environment."""
    return ("python",) if _ckern is None else ("python", "c")


def get_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return pykernels
    if name == "c":
        if _ckern is None:
            raise ValueError("compiled kernel backend is not available")
        return _ckern
    raise ValueError(f"unknown kernel backend: {name!r}")


def default_backend():
    """The backend module selected at import time."""
    return _active
