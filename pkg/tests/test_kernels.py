import os
import subprocess
import sys

import numpy as np
import pytest

from hybridevs import kernels
from hybridevs.pattern import DEFAULT_PATTERN
from hybridevs.restore import demosaic_taps, neighbor_table

needs_numba = pytest.mark.skipif("numba" not in kernels.available_backends(), reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("radius", [1, 2, 4])
def test_neighbor_kernels_agree(rng, radius):
    offsets, counts = neighbor_table(DEFAULT_PATTERN, radius)
    for _ in range(10):
        h, w = rng.integers(1, 40, 2)
        raw = rng.integers(0, 1024, (h, w))
        raw[rng.random((h, w)) < 0.2] = 0
        targets = rng.random((h, w)) < 0.6
        for skip in (False, True):
            a = kernels.neighbor_sum(raw, targets, offsets, counts, skip, backend="numba")
            b = kernels.neighbor_sum(raw, targets, offsets, counts, skip, backend="numpy")
            assert all(np.array_equal(p, q) for p, q in zip(a, b))
        a = kernels.neighbor_median(raw, targets, offsets, counts, backend="numba")
        b = kernels.neighbor_median(raw, targets, offsets, counts, backend="numpy")
        assert all(np.array_equal(p, q) for p, q in zip(a, b))


@needs_numba
@pytest.mark.parametrize("method", ["bilinear", "gradient-corrected-linear"])
def test_bayer_sums_agree(rng, method):
    taps = demosaic_taps(method)
    for _ in range(10):
        h, w = rng.integers(1, 30, 2)
        padded = rng.integers(0, 1024, (h + 4, w + 4))
        assert np.array_equal(
            kernels.bayer_sums(padded, taps, 2, backend="numba"),
            kernels.bayer_sums(padded, taps, 2, backend="numpy"),
        )


def test_median_and_spread_small_cases():
    offsets = np.array([[[0, 1], [0, 2], [0, 3], [0, 4]]] * 16, np.int64)
    counts = np.full(16, 4, np.int64)
    raw = np.array([[0, 10, 20, 30, 1000]])
    targets = np.array([[True, False, False, False, False]])
    for backend in kernels.available_backends():
        med, n, mad = kernels.neighbor_median(raw, targets, offsets, counts, backend=backend)
        # neighbors 10, 20, 30, 1000: median 25, deviations 15, 5, 5, 975 -> 10
        assert (med[0, 0], n[0, 0], mad[0, 0]) == (25, 4, 10)


def _backend_in_subprocess(value):
    env = dict(os.environ, HYBRIDEVS_BACKEND=value)
    return subprocess.run(
        [sys.executable, "-c", "from hybridevs import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
    )


def test_env_flag_selects_numpy():
    assert _backend_in_subprocess("numpy").stdout.strip() == "numpy"


def test_env_flag_rejects_unknown():
    assert _backend_in_subprocess("fortran").returncode != 0
