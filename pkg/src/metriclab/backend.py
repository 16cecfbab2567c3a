"""Kernel backend selection.

The per-anchor loss accumulations are implemented twice: as numba
@njit loop kernels and as vectorized pure-numpy fallbacks. The active
path is chosen once per process from the METRICLAB_BACKEND environment
variable:

    METRICLAB_BACKEND=numba   force the JIT kernels (error if numba missing)
    METRICLAB_BACKEND=numpy   force the pure-numpy fallbacks
    unset                     numba when importable, numpy otherwise

Both paths are serial and deterministic; they agree to ~1e-12 (different
summation orders, so not bit-identical across backends). Run
benchmarks/bench_kernels.py to compare them on your machine.
"""

import os

_VALID = ("numba", "numpy")


def numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend():
    """Return the backend name the environment selects, validating it."""
    requested = os.environ.get("METRICLAB_BACKEND", "").strip().lower()
    if requested == "":
        return "numba" if numba_available() else "numpy"
    if requested not in _VALID:
        raise RuntimeError(
            f"METRICLAB_BACKEND={requested!r} is not one of {_VALID}"
        )
    if requested == "numba" and not numba_available():
        raise RuntimeError("METRICLAB_BACKEND=numba but numba is not importable")
    return requested


_active = None


def active_backend():
    """Name of the backend in use for this process ('numba' or 'numpy')."""
    global _active
    if _active is None:
        _active = resolve_backend()
    return _active
