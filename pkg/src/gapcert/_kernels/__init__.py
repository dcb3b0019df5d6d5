"""Hot convolution kernels with backend selection at import time.

The compiled extension is preferred; the pure numpy/Python twin is used
when the extension is missing or GAPCERT_PURE_PYTHON=1 is set.  Both
backends are bit-identical (see tests/test_kernels.py).
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

if os.environ.get("GAPCERT_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - build-environment dependent
        _impl = _pykernels
        BACKEND = "python"


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def interval_gram(qlo, qhi):
    """Enclosure of Q @ Q.T for an interval matrix given as (lo, hi) arrays."""
    return _impl.interval_gram(_f64(qlo), _f64(qhi))


def interval_scatter(glo, ghi, table, out_len: int):
    """Accumulate r[table[i, j]] += G[i, j] with interval enclosure."""
    return _impl.interval_scatter(_f64(glo), _f64(ghi), _i64(table), int(out_len))


def interval_outer_scatter(alo, ahi, blo, bhi, table, out_len: int):
    """Accumulate r[table[i, j]] += a_i * b_j with interval enclosure."""
    return _impl.interval_outer_scatter(
        _f64(alo), _f64(ahi), _f64(blo), _f64(bhi), _i64(table), int(out_len)
    )


def float_outer_scatter(a, b, table, out_len: int):
    """Accumulate r[table[i, j]] += a_i * b_j in float64."""
    return _impl.float_outer_scatter(_f64(a), _f64(b), _i64(table), int(out_len))


# Cheap vector helpers shared by both backends (never the bottleneck).
interval_add_arrays = _pykernels.interval_add_arrays
interval_mul_arrays = _pykernels.interval_mul_arrays
