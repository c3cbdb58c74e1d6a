"""Readers and writers for the dataset formats.

* ``.bin`` raw frames: headerless, row-major, little-endian ``uint16`` words
  each holding a 10-bit sample. Dimensions come from the caller or the
  manifest.
* RGB labels/results: 8-bit, 3-channel PNG.
* Masks: 8-bit single-channel PNG, 0 = clear, 255 = set.
* Manifest: JSON list of scenes with raw/label paths and dimensions.
"""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np
from PIL import Image

from .errors import DecodeError, LengthMismatch, RangeError, UnsupportedBitDepth

RAW_MAX = 1023
RGB_MAX = 255

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _as_bytes(stream: bytes | bytearray | memoryview | BinaryIO) -> bytes:
    if isinstance(stream, (bytes, bytearray, memoryview)):
        return bytes(stream)
    return stream.read()


def read_raw(stream, width: int, height: int) -> np.ndarray:
    """Decode a headerless 10-bit frame into a ``(height, width)`` uint16 array."""
    data = _as_bytes(stream)
    expected = 2 * width * height
    if len(data) != expected:
        raise LengthMismatch(f"expected {expected} bytes for {width}x{height}, got {len(data)}")
    raw = np.frombuffer(data, dtype="<u2").reshape(height, width).astype(np.uint16)
    if raw.size and raw.max() > RAW_MAX:
        y, x = np.unravel_index(int(np.argmax(raw)), raw.shape)
        raise RangeError(f"sample {int(raw[y, x])} at (x={x}, y={y}) exceeds {RAW_MAX}")
    return raw


def write_raw(raw: np.ndarray) -> bytes:
    raw = check_raw(raw)
    return raw.astype("<u2").tobytes()


def load_raw(path: str | Path, width: int, height: int) -> np.ndarray:
    return read_raw(Path(path).read_bytes(), width, height)


def save_raw(path: str | Path, raw: np.ndarray) -> None:
    Path(path).write_bytes(write_raw(raw))


def check_raw(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise ValueError(f"raw image must be 2-D, got shape {raw.shape}")
    if raw.size and (raw.min() < 0 or raw.max() > RAW_MAX):
        raise RangeError(f"raw samples must lie in [0, {RAW_MAX}]")
    return raw.astype(np.uint16, copy=False)


def raw_to_unit(v):
    return np.asarray(v, dtype=np.float64) / RAW_MAX


def unit_to_raw(u):
    u = np.asarray(u, dtype=np.float64)
    return round_half_away(u * RAW_MAX).astype(np.uint16)


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def div_round(num, den):
    """Integer ``num / den`` rounded half away from zero (``den > 0``)."""
    num = np.asarray(num, dtype=np.int64)
    mag = (2 * np.abs(num) + den) // (2 * den)
    return np.where(num < 0, -mag, mag)


def raw_to_8bit(raw) -> np.ndarray:
    return div_round(np.asarray(raw, dtype=np.int64) * RGB_MAX, RAW_MAX).astype(np.uint8)


def rgb8_to_raw(rgb) -> np.ndarray:
    return div_round(np.asarray(rgb, dtype=np.int64) * RAW_MAX, RGB_MAX).astype(np.uint16)


def _png_header(data: bytes) -> tuple[int, int]:
    """Bit depth and color type from the IHDR chunk."""
    if len(data) < 29 or not data.startswith(_PNG_SIGNATURE) or data[12:16] != b"IHDR":
        raise DecodeError("not a PNG stream")
    return data[24], data[25]


def decode_png(data: bytes, mode: str) -> np.ndarray:
    bit_depth, _ = _png_header(data)
    if bit_depth != 8:
        raise UnsupportedBitDepth(f"expected 8-bit PNG, got {bit_depth}-bit")
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode != mode:
                im = im.convert(mode)
            return np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise DecodeError(str(exc)) from exc


def encode_png(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def read_rgb(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        return decode_png(path.read_bytes(), "RGB")
    except (DecodeError, UnsupportedBitDepth) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def write_rgb(path: str | Path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"RGB image must be HxWx3, got shape {rgb.shape}")
    if rgb.dtype != np.uint8 and (rgb.min() < 0 or rgb.max() > RGB_MAX):
        raise RangeError(f"RGB values must lie in [0, {RGB_MAX}]")
    Path(path).write_bytes(encode_png(rgb))


def read_mask(path: str | Path) -> np.ndarray:
    return decode_png(Path(path).read_bytes(), "L") > 127


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    Path(path).write_bytes(encode_png(np.where(np.asarray(mask, dtype=bool), 255, 0)))


@dataclass
class ManifestEntry:
    name: str
    raw: str
    label: str
    width: int
    height: int
    defects: str | None = None
    events: str | None = None
    seed: int | None = None


def write_manifest(path: str | Path, entries: list[ManifestEntry]) -> None:
    payload = {"version": 1, "scenes": [asdict(e) for e in entries]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    scenes = payload["scenes"] if isinstance(payload, dict) else payload
    return [ManifestEntry(**s) for s in scenes]


def resolve(manifest_path: str | Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else Path(manifest_path).parent / p
