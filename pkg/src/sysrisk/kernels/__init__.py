"""Kernel backend selection.

``SYSRISK_BACKEND=numba`` (default when numba imports) or ``numpy`` picks the
implementation used by the simulators. Both expose the same functions:
``simulate_system``, ``simulate_pmf``, ``simulate_mf``, ``rk4_riccati`` and
``normals_for_steps``.
"""
import os

from . import _numpy as numpy_backend

try:
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe, which warns on older TBB installs
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

BACKENDS = ("numba", "numpy")


def default_backend() -> str:
    name = os.environ.get("SYSRISK_BACKEND", "").strip().lower()
    if name:
        if name not in BACKENDS:
            raise ValueError(f"SYSRISK_BACKEND must be one of {BACKENDS}, got {name!r}")
        return name
    return "numba" if numba_backend is not None else "numpy"


def get_kernels(name: str | None = None):
    name = default_backend() if name is None else name
    if name == "numba":
        if numba_backend is None:
            raise ImportError("numba backend requested but numba is not installed")
        return numba_backend
    if name == "numpy":
        return numpy_backend
    raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")


def set_threads(n: int | None) -> int:
    """Cap the number of worker threads used by the numba kernels.

    Results never depend on this value; each path owns its random stream.
    Returns the thread count in effect.
    """
    if numba_backend is None:
        return 1
    import numba

    if n is not None:
        if n < 1:
            raise ValueError("thread count must be positive")
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()
