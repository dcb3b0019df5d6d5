"""Pure-Python/numpy backend for the hot convolution kernels.

Bit-parity contract: every float operation here mirrors the compiled
backend (same error-free transformations, same accumulation order), so the
two backends produce identical arrays and the test suite can compare them
exactly.  Keep the two files in sync.
"""

from __future__ import annotations

import math

import numpy as np

from ..exact import _DEKKER_MAX, _DEKKER_MIN, _SPLITTER, add_enclosure, mul_enclosure

_INF = math.inf


def _np_two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a + b
    if np.isinf(s).any():
        raise OverflowError("interval addition overflowed")
    t = s - a
    err = (a - (s - t)) + (b - t)
    return s, err


def _np_add_lo(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s, err = _np_two_sum(a, b)
    return np.where(err < 0.0, np.nextafter(s, -_INF), s)


def _np_add_hi(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s, err = _np_two_sum(a, b)
    return np.where(err > 0.0, np.nextafter(s, _INF), s)


def _np_two_prod(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate product with per-element lower/upper enclosure endpoints."""
    p = a * b
    zero = (a == 0.0) | (b == 0.0)
    if np.isinf(p[~zero]).any() if zero.any() else np.isinf(p).any():
        raise OverflowError("interval multiplication overflowed")
    ap = np.abs(p)
    unsafe = ~zero & ((ap <= _DEKKER_MIN) | (ap >= _DEKKER_MAX))
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        ca = _SPLITTER * a
        a_hi = ca - (ca - a)
        a_lo = a - a_hi
        cb = _SPLITTER * b
        b_hi = cb - (cb - b)
        b_lo = b - b_hi
        err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    lo = np.where(err < 0.0, np.nextafter(p, -_INF), p)
    hi = np.where(err > 0.0, np.nextafter(p, _INF), p)
    if unsafe.any():
        lo = np.where(unsafe, np.nextafter(p, -_INF), lo)
        hi = np.where(unsafe, np.nextafter(p, _INF), hi)
    if zero.any():
        lo = np.where(zero, 0.0, lo)
        hi = np.where(zero, 0.0, hi)
    return lo, hi, p


def interval_mul_arrays(
    alo: np.ndarray, ahi: np.ndarray, blo: np.ndarray, bhi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise interval product of two interval arrays."""
    lo = np.full(np.broadcast(alo, blo).shape, _INF)
    hi = np.full(lo.shape, -_INF)
    for x in (alo, ahi):
        for y in (blo, bhi):
            clo, chi, _ = _np_two_prod(x, y)
            np.minimum(lo, clo, out=lo)
            np.maximum(hi, chi, out=hi)
    return lo, hi


def interval_add_arrays(
    alo: np.ndarray, ahi: np.ndarray, blo: np.ndarray, bhi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    return _np_add_lo(alo, blo), _np_add_hi(ahi, bhi)


def interval_gram(qlo: np.ndarray, qhi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Enclosure of Q @ Q.T for an interval matrix Q of shape (n, k)."""
    n, k = qlo.shape
    glo = np.zeros((n, n))
    ghi = np.zeros((n, n))
    for col in range(k):
        clo = qlo[:, col]
        chi = qhi[:, col]
        plo, phi = interval_mul_arrays(clo[:, None], chi[:, None], clo[None, :], chi[None, :])
        glo, ghi = interval_add_arrays(glo, ghi, plo, phi)
    return glo, ghi


def interval_scatter(
    glo: np.ndarray, ghi: np.ndarray, table: np.ndarray, out_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate r[table[i, j]] += G[i, j] with enclosure, row-major order."""
    n0, n1 = table.shape
    rlo = [0.0] * out_len
    rhi = [0.0] * out_len
    for i in range(n0):
        ti = table[i]
        gl = glo[i]
        gh = ghi[i]
        for j in range(n1):
            g = int(ti[j])
            rlo[g], _ = add_enclosure(rlo[g], float(gl[j]))
            _, rhi[g] = add_enclosure(rhi[g], float(gh[j]))
    return np.asarray(rlo), np.asarray(rhi)


def interval_outer_scatter(
    alo: np.ndarray,
    ahi: np.ndarray,
    blo: np.ndarray,
    bhi: np.ndarray,
    table: np.ndarray,
    out_len: int,
) -> tuple[np.ndarray, np.ndarray]:
    """r[table[i, j]] += a_i * b_j in interval arithmetic, row-major order."""
    n0, n1 = table.shape
    rlo = [0.0] * out_len
    rhi = [0.0] * out_len
    for i in range(n0):
        xl = float(alo[i])
        xh = float(ahi[i])
        ti = table[i]
        for j in range(n1):
            lo = _INF
            hi = -_INF
            for x in (xl, xh):
                for y in (float(blo[j]), float(bhi[j])):
                    clo, chi = mul_enclosure(x, y)
                    if clo < lo:
                        lo = clo
                    if chi > hi:
                        hi = chi
            g = int(ti[j])
            rlo[g], _ = add_enclosure(rlo[g], lo)
            _, rhi[g] = add_enclosure(rhi[g], hi)
    return np.asarray(rlo), np.asarray(rhi)


def float_outer_scatter(
    a: np.ndarray, b: np.ndarray, table: np.ndarray, out_len: int
) -> np.ndarray:
    """r[table[i, j]] += a_i * b_j in plain float64, row-major order."""
    n0, n1 = table.shape
    r = [0.0] * out_len
    for i in range(n0):
        x = float(a[i])
        ti = table[i]
        for j in range(n1):
            r[ti[j]] += x * float(b[j])
    return np.asarray(r)
