"""Optional numba acceleration.

Hot kernels are compiled with numba when it is importable and the
environment variable RANKEDCOAL_NO_NUMBA is unset; otherwise the same
functions run as plain Python/numpy. ``HAS_NUMBA`` reports which path
is active so benchmarks and tests can tell the two apart.
"""

import os

HAS_NUMBA = False
numba = None

if not os.environ.get("RANKEDCOAL_NO_NUMBA"):
    try:
        import numba

        HAS_NUMBA = True
    except ImportError:
        numba = None


def maybe_jit(func):
    """Apply ``numba.njit(cache=True)`` when numba is active, else no-op."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def set_threads(count):
    """Cap numba's internal thread pool; harmless without numba."""
    if HAS_NUMBA and count is not None and count > 0:
        try:
            numba.set_num_threads(count)
        except ValueError:
            pass
