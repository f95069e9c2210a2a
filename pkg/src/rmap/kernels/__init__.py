"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment variable
``RMAP_DISABLE_NUMBA`` is unset or falsy. Both paths share signatures and
return identical selections; ``numpy_kernels`` and ``numba_kernels`` expose
them individually for tests and benchmarks.
"""

import os

import numpy as np

from . import _numpy as numpy_kernels

_flag = os.environ.get("RMAP_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("disabled by RMAP_DISABLE_NUMBA")
    from . import _numba as numba_kernels
except ImportError:
    numba_kernels = None

USE_NUMBA = numba_kernels is not None
BACKEND = "numba" if USE_NUMBA else "numpy"

_impl = numba_kernels if USE_NUMBA else numpy_kernels


def _points(a):
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 3)


def nearest_neighbor(query, ref):
    """(index, distance) of the nearest ``ref`` row for every ``query`` row."""
    return _impl.nearest_neighbor(_points(query), _points(ref))


def knn(query, ref, k):
    """(M, min(k, N)) neighbor indices ordered by distance, ties by index."""
    return _impl.knn(_points(query), _points(ref), int(k))


def farthest_point_sampling(points, m, start=0):
    """Greedy max-min selection of ``m`` indices beginning at ``start``."""
    return _impl.farthest_point_sampling(_points(points), int(m), int(start))


def traverse_rays(origin, ends, res):
    return _impl.traverse_rays(
        np.ascontiguousarray(origin, dtype=np.float64), _points(ends), float(res)
    )


def frustum_keys(origin, rot, res, half_az, half_el, max_range):
    return _impl.frustum_keys(
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(rot, dtype=np.float64),
        float(res),
        float(half_az),
        float(half_el),
        float(max_range),
    )


in_fov = numpy_kernels.in_fov
