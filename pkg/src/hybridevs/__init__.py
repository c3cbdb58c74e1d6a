"""Simulation, classical restoration and scoring for HybridEVS Quad Bayer raw data."""

__version__ = "0.1.0"

from .pattern import DEFAULT_PATTERN, PatternSpec, PixelClass  # noqa: E402
from .restore import RestoreConfig, restore  # noqa: E402
from .simulate import DefectModel, mosaic, simulate_pair  # noqa: E402
from .metrics import psnr, ssim  # noqa: E402

__all__ = [
    "DEFAULT_PATTERN",
    "DefectModel",
    "PatternSpec",
    "PixelClass",
    "RestoreConfig",
    "mosaic",
    "psnr",
    "restore",
    "simulate_pair",
    "ssim",
]
