"""Fidelity metrics: PSNR and SSIM between 8-bit RGB images.

PSNR uses the mean squared error over all pixels and channels jointly and
is capped at 100 dB for identical images. SSIM uses an 11x11 Gaussian
window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255, evaluated only where the
window fits inside the image, averaged over positions and then channels.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionMismatch, MissingResult, TooSmall, UnexpectedResult
from .rawio import read_rgb

PSNR_CAP = 100.0
PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    a, b = _check_pair(a, b)
    d = a.astype(np.int64) - b.astype(np.int64)
    sse = int(np.sum(d * d))
    if sse == 0:
        return PSNR_CAP
    # 10 log10(peak^2 / (sse / n)), with the ratio formed in exact integers first
    return min(PSNR_CAP, 10.0 * math.log10(255 * 255 * d.size / sse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    r = len(g) // 2
    out = correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    return out[r : img.shape[0] - r, r : img.shape[1] - r]


def ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """SSIM at each valid window position of a single-channel pair."""
    g = gaussian_window()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(a, b) -> float:
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise TooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[1]}x{a.shape[0]}")
    per_channel = [float(np.mean(ssim_map(a[:, :, c], b[:, :, c]))) for c in range(a.shape[2])]
    return float(np.mean(per_channel))


@dataclass
class ImageScore:
    name: str
    psnr: float
    ssim: float


@dataclass
class MetricReport:
    per_image: list[ImageScore] = field(default_factory=list)

    @property
    def psnr(self) -> float:
        return _mean([s.psnr for s in self.per_image])

    @property
    def ssim(self) -> float:
        return _mean([s.ssim for s in self.per_image])

    def to_dict(self) -> dict:
        return {
            "aggregate": {"psnr": self.psnr, "ssim": self.ssim, "count": len(self.per_image)},
            "per_image": [asdict(s) for s in self.per_image],
            "psnr_cap_db": PSNR_CAP,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "psnr", "ssim"])
        for s in self.per_image:
            w.writerow([s.name, repr(s.psnr), repr(s.ssim)])
        w.writerow(["__mean__", repr(self.psnr), repr(self.ssim)])
        return buf.getvalue()


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values) if values else float("nan")


def score_images(name: str, result, label) -> ImageScore:
    try:
        return ImageScore(name, psnr(result, label), ssim(result, label))
    except DimensionMismatch as exc:
        raise DimensionMismatch(f"{name}: {exc}") from exc


def score_pair(result_path, label_path) -> MetricReport:
    result_path = Path(result_path)
    return MetricReport([score_images(result_path.stem, read_rgb(result_path), read_rgb(label_path))])


def _pngs(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"directory not found: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() == ".png"}


def score_set(results_dir, labels_dir, threads: int = 1) -> MetricReport:
    """Score every label against the result with the same file stem."""
    results, labels = _pngs(Path(results_dir)), _pngs(Path(labels_dir))
    for stem in labels:
        if stem not in results:
            raise MissingResult(stem)
    for stem in results:
        if stem not in labels:
            raise UnexpectedResult(stem)
    stems = sorted(labels)

    def one(stem: str) -> ImageScore:
        return score_images(stem, read_rgb(results[stem]), read_rgb(labels[stem]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(one, stems))
    else:
        scores = [one(s) for s in stems]
    return MetricReport(scores)
