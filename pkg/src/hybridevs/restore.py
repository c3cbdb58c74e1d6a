"""Classical HybridEVS reconstruction.

The pipeline maps a single-channel 10-bit HybridEVS frame to an 8-bit RGB
image of the same size:

    defect correction -> event inpainting -> Quad to Bayer remosaic -> demosaic

"Neighbors" of a pixel are the sites of the same underlying color, excluding
event sites and the pixel itself, within a Chebyshev radius (4 by default,
which always contains same-color sites under the 4-periodic tile). Every
integer produced along the way is rounded half away from zero, and all
arithmetic is integer so that the numba and numpy kernels agree exactly.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .pattern import DEFAULT_PATTERN, TILE, PatternSpec, PixelClass
from .rawio import RAW_MAX, RGB_MAX, check_raw, div_round

DPC_MODES = ("both", "median-deviation", "zero-mask", "none")
DEMOSAIC_MODES = ("gradient-corrected-linear", "bilinear")
_DEMOSAIC_ALIASES = {"gcl": "gradient-corrected-linear", "malvar": "gradient-corrected-linear"}

DEFAULT_RADIUS = 4
DEFAULT_THRESHOLD = 1
DEFAULT_SPREAD_SCALE = 10.0


@dataclass(frozen=True)
class RestoreConfig:
    """One classical pipeline configuration.

    ``threshold`` and ``spread_scale`` drive median-deviation correction: a
    sample is replaced when it strays from its neighbor median by more than
    ``threshold + spread_scale * MAD``. The defaults (1 and 10) catch any
    visible defect in flat regions while leaving textured regions mostly alone.
    """

    spec: PatternSpec = DEFAULT_PATTERN
    dpc: str = "both"
    threshold: int = DEFAULT_THRESHOLD
    spread_scale: float = DEFAULT_SPREAD_SCALE
    demosaic: str = "gradient-corrected-linear"
    radius: int = DEFAULT_RADIUS
    inpaint: bool = True
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "demosaic", _DEMOSAIC_ALIASES.get(self.demosaic, self.demosaic))
        if self.dpc not in DPC_MODES:
            raise ValueError(f"dpc must be one of {DPC_MODES}, got {self.dpc!r}")
        if self.demosaic not in DEMOSAIC_MODES:
            raise ValueError(f"demosaic must be one of {DEMOSAIC_MODES}, got {self.demosaic!r}")
        if not 0 < self.threshold <= RAW_MAX:
            raise ValueError(f"threshold must lie in (0, {RAW_MAX}], got {self.threshold}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        if self.spread_scale < 0:
            raise ValueError(f"spread_scale must be >= 0, got {self.spread_scale}")

    def to_dict(self) -> dict:
        return {
            "pattern": self.spec.to_text(),
            "dpc": self.dpc,
            "threshold": self.threshold,
            "spread_scale": self.spread_scale,
            "demosaic": self.demosaic,
            "radius": self.radius,
            "inpaint": self.inpaint,
        }

    @classmethod
    def from_dict(cls, d: dict, spec: PatternSpec | None = None) -> "RestoreConfig":
        d = dict(d)
        pattern = d.pop("pattern", None)
        if pattern is not None:
            spec = PatternSpec.from_text(pattern)
        return cls(spec=spec or DEFAULT_PATTERN, **d)

    @property
    def label(self) -> str:
        return self.name or f"{self.demosaic}/{self.dpc}"

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# --------------------------------------------------------------------------
# neighbor tables


@lru_cache(maxsize=None)
def neighbor_table(spec: PatternSpec, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Same-color, non-event offsets within ``radius`` for each of 16 tile phases."""
    colors = spec.color_tile
    classes = spec.class_tile
    per_phase = []
    for py in range(TILE):
        for px in range(TILE):
            want = colors[py, px]
            offs = [
                (dy, dx)
                for dy in range(-radius, radius + 1)
                for dx in range(-radius, radius + 1)
                if (dy, dx) != (0, 0)
                and colors[(py + dy) % TILE, (px + dx) % TILE] == want
                and classes[(py + dy) % TILE, (px + dx) % TILE] != PixelClass.EVENT
            ]
            per_phase.append(offs)
    k = max(len(o) for o in per_phase)
    offsets = np.zeros((16, max(k, 1), 2), np.int64)
    counts = np.zeros(16, np.int64)
    for p, offs in enumerate(per_phase):
        counts[p] = len(offs)
        if offs:
            offsets[p, : len(offs)] = offs
    offsets.setflags(write=False)
    counts.setflags(write=False)
    return offsets, counts


def _events_for(raw: np.ndarray, spec: PatternSpec, events) -> np.ndarray:
    h, w = raw.shape
    if events is None:
        return spec.event_mask(w, h)
    events = np.asarray(events, dtype=bool)
    if events.shape != raw.shape:
        raise ValueError(f"event mask shape {events.shape} != image shape {raw.shape}")
    return events


def _global_color_means(raw: np.ndarray, colors: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Rounded mean of valid samples per underlying color; 0 for an empty set."""
    means = np.zeros(3, np.int64)
    for c in range(3):
        sel = valid & (colors == c)
        n = int(sel.sum())
        if n:
            means[c] = int(div_round(int(raw[sel].astype(np.int64).sum()), n))
    return means


# --------------------------------------------------------------------------
# pack / unpack


def _tile_index(n: int) -> np.ndarray:
    """Indices padding an axis of length ``n`` to a multiple of 4, preserving tile phase."""
    m = -(-n // TILE) * TILE
    idx = np.arange(m)
    over = idx >= n
    back = idx[over] - TILE * (-(-(idx[over] - n + 1) // TILE))
    idx[over] = np.where(back >= 0, back, idx[over] % n)
    return idx


def pad_to_tiles(raw: np.ndarray) -> np.ndarray:
    h, w = raw.shape
    if h % TILE == 0 and w % TILE == 0:
        return raw
    return raw[np.ix_(_tile_index(h), _tile_index(w))]


@dataclass
class ChannelStack:
    """Sixteen quarter-resolution planes, one per 4x4 tile position."""

    planes: np.ndarray  # (16, ceil(H/4), ceil(W/4)); plane i*4+j holds tile position (i, j)
    height: int
    width: int

    def plane(self, row: int, col: int) -> np.ndarray:
        return self.planes[row * TILE + col]

    def color_planes(self, spec: PatternSpec) -> np.ndarray:
        """The 14 planes that carry color samples (event positions dropped)."""
        keep = [r * TILE + c for r in range(TILE) for c in range(TILE) if (r, c) not in spec.event_positions]
        return self.planes[keep]


def unpack(raw: np.ndarray, spec: PatternSpec | None = None) -> ChannelStack:
    raw = np.asarray(raw)
    h, w = raw.shape
    padded = pad_to_tiles(raw)
    hq, wq = padded.shape[0] // TILE, padded.shape[1] // TILE
    planes = padded.reshape(hq, TILE, wq, TILE).transpose(1, 3, 0, 2).reshape(16, hq, wq)
    return ChannelStack(np.ascontiguousarray(planes), h, w)


def pack(stack: ChannelStack) -> np.ndarray:
    _, hq, wq = stack.planes.shape
    full = stack.planes.reshape(TILE, TILE, hq, wq).transpose(2, 0, 3, 1).reshape(hq * TILE, wq * TILE)
    return np.ascontiguousarray(full[: stack.height, : stack.width])


# --------------------------------------------------------------------------
# defect correction and inpainting


def dpc_zero_mask(raw, events=None, spec: PatternSpec = DEFAULT_PATTERN, radius: int = DEFAULT_RADIUS) -> np.ndarray:
    """Replace zero-valued non-event samples with the mean of their non-zero neighbors.

    A zero whose in-radius neighbors are all zero is left at zero (a dark
    region, not a defect). A zero with no in-bounds neighbor at all falls back
    to the global mean of non-zero samples of its color.
    """
    raw = check_raw(raw)
    events = _events_for(raw, spec, events)
    targets = (raw == 0) & ~events
    if not targets.any():
        return raw.copy()
    offsets, counts = neighbor_table(spec, radius)
    sums, n_nonzero = kernels.neighbor_sum(raw, targets, offsets, counts, skip_zero=True)
    _, n_any = kernels.neighbor_sum(raw, targets, offsets, counts, skip_zero=False)
    h, w = raw.shape
    colors = spec.color_map(w, h)
    fallback = _global_color_means(raw, colors, (raw != 0) & ~events)[colors]
    fill = np.where(n_nonzero > 0, div_round(sums, np.maximum(n_nonzero, 1)), np.where(n_any > 0, 0, fallback))
    out = raw.copy()
    out[targets] = fill[targets]
    return out


def dpc_median_deviation(
    raw,
    events=None,
    spec: PatternSpec = DEFAULT_PATTERN,
    threshold: int = DEFAULT_THRESHOLD,
    radius: int = DEFAULT_RADIUS,
    spread_scale: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Flag and replace samples that deviate from their neighbor median.

    A non-event pixel is flagged iff ``|value - median| > threshold``; flagged
    pixels take the median. Returns the corrected frame and the flag mask.

    With ``spread_scale > 0`` the threshold grows with local texture:
    ``threshold + spread_scale * MAD(neighbors)``, the median absolute
    deviation about the neighbor median. In flat regions this is the plain
    rule; on edges it stops the median from eating real detail.
    """
    if not 0 < threshold <= RAW_MAX:
        raise ValueError(f"threshold must lie in (0, {RAW_MAX}], got {threshold}")
    raw = check_raw(raw)
    events = _events_for(raw, spec, events)
    offsets, counts = neighbor_table(spec, radius)
    med, n, spread = kernels.neighbor_median(raw, ~events, offsets, counts)
    limit = threshold + spread_scale * spread if spread_scale else threshold
    flags = ~events & (n > 0) & (np.abs(raw.astype(np.int64) - med) > limit)
    out = raw.copy()
    out[flags] = med[flags]
    return out, flags


def inpaint_events(raw, events=None, spec: PatternSpec = DEFAULT_PATTERN, radius: int = DEFAULT_RADIUS) -> np.ndarray:
    """Fill every event site with the rounded mean of its same-color neighbors."""
    raw = check_raw(raw)
    events = _events_for(raw, spec, events)
    if not events.any():
        return raw.copy()
    offsets, counts = neighbor_table(spec, radius)
    sums, n = kernels.neighbor_sum(raw, events, offsets, counts)
    out = raw.copy()
    fill = div_round(sums, np.maximum(n, 1))
    if (n[events] == 0).any():
        h, w = raw.shape
        colors = spec.color_map(w, h)
        fill = np.where(n > 0, fill, _global_color_means(raw, colors, ~events)[colors])
    out[events] = fill[events]
    return out


# --------------------------------------------------------------------------
# remosaic


def bayer_tile(spec: PatternSpec) -> np.ndarray:
    """The 2x2 Bayer layout obtained by shrinking each Quad cell to one site."""
    return np.array([[int(spec.cell_colors[r][c]) for c in range(2)] for r in range(2)], dtype=np.int8)


@lru_cache(maxsize=None)
def remosaic_table(spec: PatternSpec) -> tuple[tuple[int, int], ...]:
    """Source tile position for each of the 16 target positions (row-major).

    Within each color the assignment minimises the total squared
    displacement between Quad sites and Bayer sites.
    """
    src_colors = spec.color_tile
    dst_colors = np.tile(bayer_tile(spec), (2, 2))
    table: list[tuple[int, int] | None] = [None] * 16
    for c in range(3):
        src = np.argwhere(src_colors == c)
        dst = np.argwhere(dst_colors == c)
        cost = ((dst[:, None, :] - src[None, :, :]) ** 2).sum(axis=2)
        rows, cols = linear_sum_assignment(cost)
        for r, s in zip(rows, cols):
            table[dst[r][0] * TILE + dst[r][1]] = (int(src[s][0]), int(src[s][1]))
    return tuple(table)


def remosaic_quad_to_bayer(raw, spec: PatternSpec = DEFAULT_PATTERN) -> np.ndarray:
    raw = np.asarray(raw)
    h, w = raw.shape
    table = remosaic_table(spec)
    flat_src = np.array([r * TILE + c for r, c in table])
    stack = unpack(raw, spec)
    out = ChannelStack(stack.planes[flat_src], h, w)
    return pack(out)


# --------------------------------------------------------------------------
# demosaic

TAP_DENOM = 16
_PAD = 2


def _kernels_5x5() -> dict[str, np.ndarray]:
    z = np.zeros((5, 5), np.int64)
    ident = z.copy()
    ident[2, 2] = 16
    bl_cross = z.copy()
    bl_cross[1, 2] = bl_cross[3, 2] = bl_cross[2, 1] = bl_cross[2, 3] = 4
    bl_horiz = z.copy()
    bl_horiz[2, 1] = bl_horiz[2, 3] = 8
    bl_diag = z.copy()
    bl_diag[1, 1] = bl_diag[1, 3] = bl_diag[3, 1] = bl_diag[3, 3] = 4
    # gradient-corrected linear interpolation kernels, scaled by 16
    gc_cross = 2 * np.array(
        [[0, 0, -1, 0, 0], [0, 0, 2, 0, 0], [-1, 2, 4, 2, -1], [0, 0, 2, 0, 0], [0, 0, -1, 0, 0]]
    )
    gc_horiz = np.array(
        [[0, 0, 1, 0, 0], [0, -2, 0, -2, 0], [-2, 8, 10, 8, -2], [0, -2, 0, -2, 0], [0, 0, 1, 0, 0]]
    )
    gc_diag = np.array(
        [[0, 0, -3, 0, 0], [0, 4, 0, 4, 0], [-3, 0, 12, 0, -3], [0, 4, 0, 4, 0], [0, 0, -3, 0, 0]]
    )
    return {
        "ident": ident,
        "bilinear": {"cross": bl_cross, "horiz": bl_horiz, "vert": bl_horiz.T.copy(), "diag": bl_diag},
        "gradient-corrected-linear": {"cross": gc_cross, "horiz": gc_horiz, "vert": gc_horiz.T.copy(), "diag": gc_diag},
    }


@lru_cache(maxsize=None)
def demosaic_taps(method: str, layout: tuple[tuple[int, int], tuple[int, int]] = ((0, 1), (1, 2))) -> np.ndarray:
    """``(2, 2, 3, 5, 5)`` integer taps: phase row, phase col, output channel.

    ``layout`` gives the channel at each 2x2 Bayer phase; the default is RGGB.
    """
    method = _DEMOSAIC_ALIASES.get(method, method)
    ks = _kernels_5x5()
    fam = ks[method]
    taps = np.zeros((2, 2, 3, 5, 5), np.int64)
    for py in range(2):
        for px in range(2):
            native = layout[py][px]
            for c in range(3):
                if c == native:
                    k = ks["ident"]
                elif c == PixelClass.GREEN:
                    k = fam["cross"]
                elif native == PixelClass.GREEN:
                    k = fam["horiz"] if layout[py][1 - px] == c else fam["vert"]
                else:
                    k = fam["diag"]
                taps[py, px, c] = k
    taps.setflags(write=False)
    return taps


def _reflect_pad(raw: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(raw.astype(np.int64), pad, mode="reflect")


def bayer_sums(raw, method: str = "gradient-corrected-linear", layout=((0, 1), (1, 2)), backend=None) -> np.ndarray:
    """Interpolated channel values scaled by ``TAP_DENOM`` (exact integers)."""
    raw = np.asarray(raw)
    layout = tuple(tuple(int(v) for v in row) for row in layout)
    return kernels.bayer_sums(_reflect_pad(raw, _PAD), demosaic_taps(method, layout), _PAD, backend=backend)


def interpolate_bayer(raw, method: str = "gradient-corrected-linear", layout=((0, 1), (1, 2))) -> np.ndarray:
    """Unclamped, unquantised RGB in 10-bit units (float64, exact)."""
    return bayer_sums(raw, method, layout) / TAP_DENOM


def sums_to_rgb8(sums: np.ndarray) -> np.ndarray:
    return np.clip(div_round(sums * RGB_MAX, TAP_DENOM * RAW_MAX), 0, RGB_MAX).astype(np.uint8)


def demosaic_bayer(raw, method: str = "gradient-corrected-linear", layout=((0, 1), (1, 2))) -> np.ndarray:
    """RGGB (by default) Bayer frame to 8-bit RGB of the same size."""
    return sums_to_rgb8(bayer_sums(raw, method, layout))


# --------------------------------------------------------------------------
# full pipeline


def correct_defects(raw: np.ndarray, config: RestoreConfig, events=None) -> tuple[np.ndarray, np.ndarray]:
    raw = check_raw(raw)
    flags = np.zeros(raw.shape, dtype=bool)
    if config.dpc in ("both", "median-deviation"):
        raw, flags = dpc_median_deviation(
            raw, events, config.spec, config.threshold, config.radius, config.spread_scale
        )
    if config.dpc in ("both", "zero-mask"):
        fixed = dpc_zero_mask(raw, events, config.spec, config.radius)
        flags |= fixed != raw
        raw = fixed
    return raw, flags


def restore(raw, config: RestoreConfig | None = None) -> np.ndarray:
    """HybridEVS frame (H x W, 10-bit) to RGB (H x W x 3, 8-bit)."""
    config = config or RestoreConfig()
    raw = check_raw(raw)
    events = config.spec.event_mask(raw.shape[1], raw.shape[0])
    x, _ = correct_defects(raw, config, events)
    if config.inpaint:
        x = inpaint_events(x, events, config.spec, config.radius)
    x = remosaic_quad_to_bayer(x, config.spec)
    layout = tuple(tuple(int(v) for v in row) for row in bayer_tile(config.spec))
    return demosaic_bayer(x, config.demosaic, layout)
