"""Hot inner loops of the restoration pipeline.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version. Both work purely in integer arithmetic so they agree bit for bit.
The active backend is chosen once at import time from the
``HYBRIDEVS_BACKEND`` environment variable (``numba`` or ``numpy``); when the
variable is unset numba is used if it can be imported.

Neighbor tables
---------------
Neighborhood kernels take ``offsets`` with shape ``(16, K, 2)`` and
``counts`` with shape ``(16,)``. Row ``p = (y % 4) * 4 + x % 4`` lists the
``(dy, dx)`` offsets that are valid neighbors for a pixel of tile phase
``p``; only the first ``counts[p]`` rows are meaningful.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _pick_backend() -> str:
    requested = os.environ.get("HYBRIDEVS_BACKEND", "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"HYBRIDEVS_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        raise ImportError("HYBRIDEVS_BACKEND=numba but numba is not installed")
    return requested


BACKEND = _pick_backend()


# --------------------------------------------------------------------------
# numba


@njit(cache=True, nogil=True)
def _nb_neighbor_sum(raw, targets, offsets, counts, skip_zero):
    h, w = raw.shape
    sums = np.zeros((h, w), np.int64)
    ns = np.zeros((h, w), np.int64)
    for y in range(h):
        for x in range(w):
            if not targets[y, x]:
                continue
            p = (y % 4) * 4 + (x % 4)
            s = 0
            n = 0
            for k in range(counts[p]):
                yy = y + offsets[p, k, 0]
                xx = x + offsets[p, k, 1]
                if yy < 0 or yy >= h or xx < 0 or xx >= w:
                    continue
                v = raw[yy, xx]
                if skip_zero and v == 0:
                    continue
                s += v
                n += 1
            sums[y, x] = s
            ns[y, x] = n
    return sums, ns


@njit(cache=True, nogil=True)
def _nb_neighbor_median(raw, targets, offsets, counts):
    h, w = raw.shape
    med = np.zeros((h, w), np.int64)
    ns = np.zeros((h, w), np.int64)
    mad = np.zeros((h, w), np.int64)
    buf = np.empty(offsets.shape[1], np.int64)
    dev = np.empty(offsets.shape[1], np.int64)
    for y in range(h):
        for x in range(w):
            if not targets[y, x]:
                continue
            p = (y % 4) * 4 + (x % 4)
            n = 0
            for k in range(counts[p]):
                yy = y + offsets[p, k, 0]
                xx = x + offsets[p, k, 1]
                if yy < 0 or yy >= h or xx < 0 or xx >= w:
                    continue
                # insertion sort while gathering
                v = np.int64(raw[yy, xx])
                j = n
                while j > 0 and buf[j - 1] > v:
                    buf[j] = buf[j - 1]
                    j -= 1
                buf[j] = v
                n += 1
            ns[y, x] = n
            if n == 0:
                continue
            m = _nb_sorted_median(buf, n)
            med[y, x] = m
            for i in range(n):
                v = abs(buf[i] - m)
                j = i
                while j > 0 and dev[j - 1] > v:
                    dev[j] = dev[j - 1]
                    j -= 1
                dev[j] = v
            mad[y, x] = _nb_sorted_median(dev, n)
    return med, ns, mad


@njit(cache=True, nogil=True)
def _nb_sorted_median(buf, n):
    if n % 2 == 1:
        return buf[n // 2]
    return (buf[n // 2 - 1] + buf[n // 2] + 1) // 2


@njit(cache=True, nogil=True)
def _nb_bayer_sums(padded, taps, pad):
    hp, wp = padded.shape
    h = hp - 2 * pad
    w = wp - 2 * pad
    ksz = taps.shape[3]
    r = ksz // 2
    out = np.zeros((h, w, 3), np.int64)
    for y in range(h):
        py = y % 2
        for x in range(w):
            px = x % 2
            for c in range(3):
                s = 0
                for i in range(ksz):
                    row = y + pad - r + i
                    for j in range(ksz):
                        t = taps[py, px, c, i, j]
                        if t != 0:
                            s += t * padded[row, x + pad - r + j]
                out[y, x, c] = s
    return out


# --------------------------------------------------------------------------
# numpy


def _np_gather(raw, ys, xs, offsets_p, count_p):
    """``(n, count_p)`` neighbor values and in-bounds flags for target pixels."""
    h, w = raw.shape
    off = offsets_p[:count_p]
    yy = ys[:, None] + off[None, :, 0]
    xx = xs[:, None] + off[None, :, 1]
    ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
    vals = raw[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)].astype(np.int64)
    return vals, ok


def _np_neighbor_sum(raw, targets, offsets, counts, skip_zero):
    h, w = raw.shape
    sums = np.zeros((h, w), np.int64)
    ns = np.zeros((h, w), np.int64)
    ys_all, xs_all = np.nonzero(targets)
    phase = (ys_all % 4) * 4 + xs_all % 4
    for p in range(16):
        sel = phase == p
        if not sel.any() or counts[p] == 0:
            continue
        ys, xs = ys_all[sel], xs_all[sel]
        vals, ok = _np_gather(raw, ys, xs, offsets[p], counts[p])
        if skip_zero:
            ok &= vals != 0
        sums[ys, xs] = np.where(ok, vals, 0).sum(axis=1)
        ns[ys, xs] = ok.sum(axis=1)
    return sums, ns


def _np_neighbor_median(raw, targets, offsets, counts):
    h, w = raw.shape
    med = np.zeros((h, w), np.int64)
    ns = np.zeros((h, w), np.int64)
    mad = np.zeros((h, w), np.int64)
    ys_all, xs_all = np.nonzero(targets)
    phase = (ys_all % 4) * 4 + xs_all % 4
    big = np.iinfo(np.int64).max
    for p in range(16):
        sel = phase == p
        if not sel.any() or counts[p] == 0:
            continue
        ys, xs = ys_all[sel], xs_all[sel]
        vals, ok = _np_gather(raw, ys, xs, offsets[p], counts[p])
        vals = np.sort(np.where(ok, vals, big), axis=1)
        n = ok.sum(axis=1)
        # rows with no valid neighbor read column 0 and are zeroed below
        has = n > 0
        vals[~has] = 0
        m = _np_sorted_median(vals, n)
        valid = np.arange(vals.shape[1])[None, :] < n[:, None]
        dev = np.sort(np.where(valid, np.abs(vals - m[:, None]), big), axis=1)
        dev[~has] = 0
        med[ys, xs] = np.where(has, m, 0)
        ns[ys, xs] = n
        mad[ys, xs] = np.where(has, _np_sorted_median(dev, n), 0)
    return med, ns, mad


def _np_sorted_median(rows, n):
    """Row-wise median of the first ``n`` entries of already sorted rows."""

    def at(i):
        return np.take_along_axis(rows, np.maximum(i, 0)[:, None], axis=1)[:, 0]

    lo, hi = at((n - 1) // 2), at(n // 2)
    return np.where(n % 2 == 1, lo, (lo + hi + 1) // 2)


def _np_bayer_sums(padded, taps, pad):
    hp, wp = padded.shape
    h, w = hp - 2 * pad, wp - 2 * pad
    ksz = taps.shape[3]
    r = ksz // 2
    out = np.zeros((h, w, 3), np.int64)
    for py in range(2):
        for px in range(2):
            if py >= h or px >= w:
                continue
            sub_h = len(range(py, h, 2))
            sub_w = len(range(px, w, 2))
            for c in range(3):
                acc = np.zeros((sub_h, sub_w), np.int64)
                for i in range(ksz):
                    for j in range(ksz):
                        t = int(taps[py, px, c, i, j])
                        if t == 0:
                            continue
                        y0 = py + pad - r + i
                        x0 = px + pad - r + j
                        acc += t * padded[y0 : y0 + 2 * sub_h : 2, x0 : x0 + 2 * sub_w : 2]
                out[py::2, px::2, c] = acc
    return out


# --------------------------------------------------------------------------
# dispatch

_IMPLS = {
    "numba": (_nb_neighbor_sum, _nb_neighbor_median, _nb_bayer_sums),
    "numpy": (_np_neighbor_sum, _np_neighbor_median, _np_bayer_sums),
}


def _impl(backend: str | None, idx: int):
    return _IMPLS[backend or BACKEND][idx]


def neighbor_sum(raw, targets, offsets, counts, skip_zero=False, backend=None):
    """Sum and count of valid neighbor samples at every target pixel."""
    raw = np.ascontiguousarray(raw, dtype=np.int64)
    targets = np.ascontiguousarray(targets, dtype=np.bool_)
    return _impl(backend, 0)(raw, targets, offsets, counts, bool(skip_zero))


def neighbor_median(raw, targets, offsets, counts, backend=None):
    """Median, count and median absolute deviation of the valid neighbors.

    An even count takes the mean of the two middle values rounded half up,
    for the median and for the deviation alike.
    """
    raw = np.ascontiguousarray(raw, dtype=np.int64)
    targets = np.ascontiguousarray(targets, dtype=np.bool_)
    return _impl(backend, 1)(raw, targets, offsets, counts)


def bayer_sums(padded, taps, pad, backend=None):
    padded = np.ascontiguousarray(padded, dtype=np.int64)
    taps = np.ascontiguousarray(taps, dtype=np.int64)
    return _impl(backend, 2)(padded, taps, int(pad))


def available_backends() -> list[str]:
    return ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
