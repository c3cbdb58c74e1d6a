from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridevs.rawio import write_rgb  # noqa: E402
from hybridevs.simulate import generate_dataset, smooth_scene, DefectModel  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def write_labels(directory: Path, count: int, width: int = 48, height: int = 40, seed: int = 0) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        write_rgb(directory / f"scene_{i:03d}.png", smooth_scene(width, height, seed + i))
    return directory


@pytest.fixture
def dataset(tmp_path):
    """A small simulated set on disk; returns the manifest path."""
    labels = write_labels(tmp_path / "src", 4)
    generate_dataset(labels, tmp_path / "sim", model=DefectModel(0.005, "stuck-high"), seed=7)
    return tmp_path / "sim" / "manifest.json"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
