"""HybridEVS color filter array geometry.

A HybridEVS sensor is a Quad Bayer mosaic (2x2 cells of identical color
filters, tiled with period 4) in which two of the sixteen sites of every 4x4
tile are event pixels that carry no color sample.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import PatternError

TILE = 4


class PixelClass(enum.IntEnum):
    # values double as RGB channel indices for the three colors
    RED = 0
    GREEN = 1
    BLUE = 2
    EVENT = 3

    @property
    def code(self) -> str:
        return "RGBE"[self.value]

    @classmethod
    def from_code(cls, code: str) -> "PixelClass":
        try:
            return cls("RGBE".index(code.upper()))
        except ValueError:
            raise PatternError(f"unknown pixel code {code!r}") from None


@dataclass(frozen=True)
class PatternSpec:
    """A validated 4x4 HybridEVS tile.

    ``tile[row][col]`` is the class of the site at ``(row, col)``; the tile
    repeats with period 4 in both axes.
    """

    tile: tuple[tuple[PixelClass, ...], ...]

    def __post_init__(self):
        tile = tuple(tuple(PixelClass(v) for v in row) for row in self.tile)
        object.__setattr__(self, "tile", tile)
        validate(self)

    @classmethod
    def default(cls) -> "PatternSpec":
        return DEFAULT_PATTERN

    @classmethod
    def from_text(cls, text: str) -> "PatternSpec":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if len(rows) != TILE:
            raise PatternError(f"expected {TILE} rows, got {len(rows)}")
        tile = []
        for r, row in enumerate(rows):
            codes = row.split() if " " in row else list(row)
            if len(codes) != TILE:
                raise PatternError(f"row {r}: expected {TILE} codes, got {len(codes)}")
            tile.append(tuple(PixelClass.from_code(c) for c in codes))
        return cls(tuple(tile))

    @classmethod
    def load(cls, path: str | Path) -> "PatternSpec":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        return "".join("".join(c.code for c in row) + "\n" for row in self.tile)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @cached_property
    def event_positions(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (r, c) for r in range(TILE) for c in range(TILE) if self.tile[r][c] == PixelClass.EVENT
        )

    @cached_property
    def cell_colors(self) -> tuple[tuple[PixelClass, PixelClass], tuple[PixelClass, PixelClass]]:
        """Color carried by each 2x2 cell, indexed ``[cell_row][cell_col]``."""
        return tuple(tuple(_cell_color(self.tile, cr, cc) for cc in range(2)) for cr in range(2))

    @cached_property
    def class_tile(self) -> np.ndarray:
        return np.array([[int(v) for v in row] for row in self.tile], dtype=np.int8)

    @cached_property
    def color_tile(self) -> np.ndarray:
        """4x4 array of underlying colors (events resolved to their cell color)."""
        out = np.empty((TILE, TILE), dtype=np.int8)
        for r in range(TILE):
            for c in range(TILE):
                out[r, c] = int(self.cell_colors[r // 2][c // 2])
        return out

    def classify(self, x: int, y: int) -> PixelClass:
        return self.tile[y % TILE][x % TILE]

    def underlying_color(self, x: int, y: int) -> PixelClass:
        return self.cell_colors[(y % TILE) // 2][(x % TILE) // 2]

    def class_map(self, width: int, height: int) -> np.ndarray:
        return _tile_to(self.class_tile, width, height)

    def color_map(self, width: int, height: int) -> np.ndarray:
        return _tile_to(self.color_tile, width, height)

    def event_mask(self, width: int, height: int) -> np.ndarray:
        return self.class_map(width, height) == PixelClass.EVENT


def _tile_to(tile: np.ndarray, width: int, height: int) -> np.ndarray:
    if width <= 0 or height <= 0:
        raise ValueError(f"dimensions must be positive, got {width}x{height}")
    reps = (-(-height // TILE), -(-width // TILE))
    return np.tile(tile, reps)[:height, :width]


def _cell_color(tile, cr: int, cc: int) -> PixelClass:
    colors = {
        tile[r][c]
        for r in range(2 * cr, 2 * cr + 2)
        for c in range(2 * cc, 2 * cc + 2)
        if tile[r][c] != PixelClass.EVENT
    }
    if len(colors) != 1:
        raise PatternError(f"cell ({cr},{cc}) mixes colors {sorted(c.code for c in colors)}")
    return colors.pop()


def validate(spec: PatternSpec) -> None:
    tile = spec.tile
    if len(tile) != TILE or any(len(row) != TILE for row in tile):
        raise PatternError("tile must be 4x4")
    n_events = sum(v == PixelClass.EVENT for row in tile for v in row)
    if n_events != 2:
        raise PatternError(f"tile must hold exactly 2 event pixels, found {n_events}")
    cells = [[_cell_color(tile, cr, cc) for cc in range(2)] for cr in range(2)]
    flat = sorted(c for row in cells for c in row)
    if flat != [PixelClass.RED, PixelClass.GREEN, PixelClass.GREEN, PixelClass.BLUE]:
        raise PatternError("cells must carry colors R, G, G, B")
    # the two green cells must sit on a diagonal so that the cell grid is a Bayer layout
    greens = {(cr, cc) for cr in range(2) for cc in range(2) if cells[cr][cc] == PixelClass.GREEN}
    if greens not in ({(0, 0), (1, 1)}, {(0, 1), (1, 0)}):
        raise PatternError("green cells must be diagonal")


def _default_tile():
    R, G, B, E = PixelClass.RED, PixelClass.GREEN, PixelClass.BLUE, PixelClass.EVENT
    return (
        (R, R, G, G),
        (R, E, G, G),
        (G, G, E, B),
        (G, G, B, B),
    )


DEFAULT_PATTERN = PatternSpec(_default_tile())


def classify(spec: PatternSpec, x: int, y: int) -> PixelClass:
    return spec.classify(x, y)


def underlying_color(spec: PatternSpec, x: int, y: int) -> PixelClass:
    return spec.underlying_color(x, y)


def event_mask(spec: PatternSpec, width: int, height: int) -> np.ndarray:
    return spec.event_mask(width, height)
