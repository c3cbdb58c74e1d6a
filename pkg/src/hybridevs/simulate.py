"""Paired dataset simulation: clean RGB labels to HybridEVS raw inputs.

Randomness comes from numpy's PCG64 generator (``np.random.default_rng``);
a seed fully determines every output.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pattern import DEFAULT_PATTERN, PatternSpec
from .rawio import (
    RAW_MAX,
    ManifestEntry,
    check_raw,
    read_rgb,
    rgb8_to_raw,
    save_raw,
    write_manifest,
    write_mask,
    write_rgb,
)

log = logging.getLogger(__name__)

DEFECT_MODES = ("stuck-low", "stuck-high", "uniform")


@dataclass(frozen=True)
class DefectModel:
    density: float = 0.001
    mode: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must lie in [0, 1], got {self.density}")
        if self.mode not in DEFECT_MODES:
            raise ValueError(f"mode must be one of {DEFECT_MODES}, got {self.mode!r}")

    def with_seed(self, seed: int) -> "DefectModel":
        return DefectModel(self.density, self.mode, seed)


@dataclass
class SimulatedPair:
    input: np.ndarray  # (H, W) uint16
    label: np.ndarray  # (H, W, 3) uint8
    defects: np.ndarray  # (H, W) bool
    events: np.ndarray  # (H, W) bool


def mosaic(rgb, spec: PatternSpec = DEFAULT_PATTERN) -> np.ndarray:
    """Sample an 8-bit RGB image through the HybridEVS pattern.

    Color sites keep their channel scaled to 10 bits; event sites read 0.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected HxWx3 RGB, got shape {rgb.shape}")
    h, w, _ = rgb.shape
    colors = spec.color_map(w, h).astype(np.intp)
    picked = np.take_along_axis(rgb, colors[:, :, None], axis=2)[:, :, 0]
    raw = rgb8_to_raw(picked)
    raw[spec.event_mask(w, h)] = 0
    return raw


def defect_count(density: float, n_candidates: int) -> int:
    return int(np.floor(density * n_candidates + 0.5))


def inject_defects(raw, events, model: DefectModel) -> tuple[np.ndarray, np.ndarray]:
    raw = check_raw(raw)
    events = np.asarray(events, dtype=bool)
    if events.shape != raw.shape:
        raise ValueError(f"event mask shape {events.shape} != image shape {raw.shape}")
    candidates = np.flatnonzero(~events)
    k = defect_count(model.density, candidates.size)
    rng = np.random.default_rng(model.seed)
    chosen = np.sort(rng.choice(candidates, size=k, replace=False)) if k else np.empty(0, np.intp)
    if model.mode == "stuck-low":
        values = np.zeros(k, np.uint16)
    elif model.mode == "stuck-high":
        values = np.full(k, RAW_MAX, np.uint16)
    else:
        values = rng.integers(0, RAW_MAX + 1, size=k).astype(np.uint16)
    out = raw.copy()
    out.flat[chosen] = values
    mask = np.zeros(raw.shape, dtype=bool)
    mask.flat[chosen] = True
    return out, mask


def transform(rgb: np.ndarray, rotation: int, flip: bool) -> np.ndarray:
    """Rotate by ``rotation`` quarter turns counter-clockwise, then optionally mirror left-right."""
    out = np.rot90(rgb, rotation)
    if flip:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def draw_transform(seed) -> tuple[int, bool]:
    rng = np.random.default_rng(seed)
    return int(rng.integers(4)), bool(rng.integers(2))


def simulate_pair(label, spec: PatternSpec, model: DefectModel) -> SimulatedPair:
    label = np.ascontiguousarray(label, dtype=np.uint8)
    h, w, _ = label.shape
    events = spec.event_mask(w, h)
    raw, defects = inject_defects(mosaic(label, spec), events, model)
    return SimulatedPair(raw, label, defects, events)


def augment(label, spec: PatternSpec, model: DefectModel, seed) -> SimulatedPair:
    """Random rotation/flip of the label, then mosaic and defect injection."""
    rotation, flip = draw_transform(seed)
    return simulate_pair(transform(np.asarray(label), rotation, flip), spec, model)


def scene_seed(seed: int, index: int) -> int:
    """Stable per-image seed so parallel generation matches serial output."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def generate_dataset(
    labels_dir,
    out_dir,
    spec: PatternSpec = DEFAULT_PATTERN,
    model: DefectModel = DefectModel(),
    seed: int = 0,
    augment_labels: bool = False,
    threads: int = 1,
) -> list[ManifestEntry]:
    """Simulate every PNG in ``labels_dir`` into ``out_dir`` and write ``manifest.json``."""
    labels_dir, out_dir = Path(labels_dir), Path(out_dir)
    if not labels_dir.is_dir():
        raise FileNotFoundError(f"labels directory not found: {labels_dir}")
    sources = sorted(p for p in labels_dir.iterdir() if p.suffix.lower() == ".png")
    for sub in ("inputs", "labels", "masks"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    def one(index: int, path: Path) -> ManifestEntry:
        s = scene_seed(seed, index)
        try:
            label = read_rgb(path)
        except Exception as exc:
            raise type(exc)(f"{path}: {exc}") from exc
        m = model.with_seed(s)
        pair = augment(label, spec, m, s) if augment_labels else simulate_pair(label, spec, m)
        stem = path.stem
        h, w = pair.input.shape
        entry = ManifestEntry(
            name=stem,
            raw=f"inputs/{stem}.bin",
            label=f"labels/{stem}.png",
            width=w,
            height=h,
            defects=f"masks/{stem}_defects.png",
            events=f"masks/{stem}_events.png",
            seed=s,
        )
        save_raw(out_dir / entry.raw, pair.input)
        write_rgb(out_dir / entry.label, pair.label)
        write_mask(out_dir / entry.defects, pair.defects)
        write_mask(out_dir / entry.events, pair.events)
        log.debug("simulated %s (%dx%d, %d defects)", stem, w, h, int(pair.defects.sum()))
        return entry

    if threads > 1 and len(sources) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(one, range(len(sources)), sources))
    else:
        entries = [one(i, p) for i, p in enumerate(sources)]
    write_manifest(out_dir / "manifest.json", entries)
    return entries


def smooth_scene(width: int, height: int, seed) -> np.ndarray:
    """Seeded smooth synthetic RGB scene: per-channel low-order polynomial ramps."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    u = xx / max(width - 1, 1)
    v = yy / max(height - 1, 1)
    out = np.empty((height, width, 3), np.float64)
    for c in range(3):
        a = rng.uniform(-1, 1, size=6)
        f = a[0] + a[1] * u + a[2] * v + a[3] * u * v + 0.5 * a[4] * u * u + 0.5 * a[5] * v * v
        lo, hi = rng.uniform(20, 90), rng.uniform(160, 235)
        f = (f - f.min()) / max(np.ptp(f), 1e-12)
        out[:, :, c] = lo + (hi - lo) * f
    return np.floor(out + 0.5).astype(np.uint8)
