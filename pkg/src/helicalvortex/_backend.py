"""Kernel backend selection.

The hot pair loops exist twice: numba-compiled loops in ``_kernels_numba`` and a
vectorized pure-numpy path in ``_kernels_numpy``.  ``HELIX_BACKEND=numpy``
forces the numpy path; otherwise numba is used when it imports.  ``HELIX_THREADS``
caps the numba worker count.  Results never depend on the worker count because
every per-target reduction runs sequentially in fixed index order.
"""

from __future__ import annotations

import os
import warnings

try:
    import numba

    # the bundled TBB is often too old; prefer OpenMP or numba's own pool
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def requested_backend() -> str:
    name = os.environ.get("HELIX_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"HELIX_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        return "numpy"
    return name


def apply_thread_cap() -> int | None:
    """Honour ``HELIX_THREADS`` for the numba pool; returns the active count."""
    if not HAS_NUMBA:
        return None
    cap = os.environ.get("HELIX_THREADS")
    if cap:
        n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
    return numba.get_num_threads()


def get_kernels(backend: str | None = None):
    """Return the kernel module for ``backend`` (default: from the environment)."""
    backend = backend or requested_backend()
    if backend == "numba":
        from . import _kernels_numba as mod

        apply_thread_cap()
        return mod
    from . import _kernels_numpy as mod

    return mod
