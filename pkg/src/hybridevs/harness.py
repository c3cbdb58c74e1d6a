"""Experiment harness: timing, ranked leaderboards and full runs.

A run restores every scene of a manifest under each configuration, scores
the results and ranks the configurations. The run report is a pure function
of its inputs (no timings, thread counts or host details), so two runs with
the same seeds, serial or parallel, produce byte-identical JSON. Wall-clock
measurements and host details live in a separate environment record.
"""
from __future__ import annotations

import json
import logging
import os
import platform
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__, kernels
from .errors import HybridEVSError
from .metrics import ImageScore, MetricReport, psnr, ssim
from .rawio import load_raw, read_manifest, read_rgb, resolve, write_rgb
from .restore import RestoreConfig, restore
from .simulate import DefectModel, simulate_pair, smooth_scene

log = logging.getLogger(__name__)

BENCH_WIDTH = 1920
BENCH_HEIGHT = 1080

TIMING_NOTE = (
    "Times are single-frame CPU wall-clock seconds for the classical pipeline on this host; "
    "they are not comparable to GPU timings of learned models."
)


class SceneError(HybridEVSError):
    def __init__(self, scene: str, cause: Exception):
        self.scene = scene
        super().__init__(f"scene {scene!r}: {type(cause).__name__}: {cause}")


# --------------------------------------------------------------------------
# timing


def bench_input(width: int = BENCH_WIDTH, height: int = BENCH_HEIGHT, seed: int = 0) -> np.ndarray:
    label = smooth_scene(width, height, seed)
    return simulate_pair(label, RestoreConfig().spec, DefectModel(seed=seed)).input


def time_samples(
    config: RestoreConfig | None = None,
    width: int = BENCH_WIDTH,
    height: int = BENCH_HEIGHT,
    repeats: int = 3,
    seed: int = 0,
    *,
    raw: np.ndarray | None = None,
    restore_fn: Callable = restore,
    clock: Callable[[], float] = time.perf_counter,
) -> list[float]:
    """Wall-clock seconds of ``repeats`` restorations after one untimed warm-up.

    The input is generated (or passed in) before any timing starts, so only
    the restoration itself is measured.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    config = config or RestoreConfig()
    if raw is None:
        raw = bench_input(width, height, seed)
    restore_fn(raw, config)
    samples = []
    for _ in range(repeats):
        t0 = clock()
        restore_fn(raw, config)
        samples.append(clock() - t0)
    return samples


def bench_time(config=None, width=BENCH_WIDTH, height=BENCH_HEIGHT, repeats=3, seed=0, **kwargs) -> float:
    """Median restoration time in seconds."""
    return float(statistics.median(time_samples(config, width, height, repeats, seed, **kwargs)))


def environment(threads: int = 1) -> dict:
    try:
        import numba

        numba_version = numba.__version__
    except ImportError:
        numba_version = None
    return {
        "tool_version": __version__,
        "backend": kernels.BACKEND,
        "numba": numba_version,
        "numpy": np.__version__,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "threads": threads,
    }


# --------------------------------------------------------------------------
# leaderboard


@dataclass
class LeaderboardEntry:
    rank: int
    name: str
    psnr: float
    ssim: float
    time_seconds: float | None = None


def _sort_key(e: LeaderboardEntry):
    t = e.time_seconds if e.time_seconds is not None else float("inf")
    return (-e.psnr, -e.ssim, t, e.name)


def leaderboard(entries: Iterable) -> list[LeaderboardEntry]:
    """Rank submissions: PSNR desc, then SSIM desc, then time asc, then name.

    Each entry is ``(name, report, time)`` where ``report`` is a
    ``MetricReport`` or a ``(psnr, ssim)`` pair, or a ``LeaderboardEntry``.
    """
    rows = []
    for e in entries:
        if isinstance(e, LeaderboardEntry):
            rows.append(LeaderboardEntry(0, e.name, e.psnr, e.ssim, e.time_seconds))
            continue
        name, report, t = e
        p, s = (report.psnr, report.ssim) if isinstance(report, MetricReport) else report
        rows.append(LeaderboardEntry(0, str(name), float(p), float(s), None if t is None else float(t)))
    if not rows:
        raise ValueError("leaderboard needs at least one entry")
    rows.sort(key=_sort_key)
    for i, r in enumerate(rows, start=1):
        r.rank = i
    return rows


def format_table(rows: Sequence[LeaderboardEntry], note: str | None = TIMING_NOTE) -> str:
    name_w = max(4, *(len(r.name) for r in rows))
    lines = []
    if note:
        lines.append(f"# {note}")
    lines.append(f"{'rank':>4}  {'name':<{name_w}}  {'PSNR':>9}  {'SSIM':>7}  {'Time (s)':>9}")
    for r in rows:
        t = "-" if r.time_seconds is None else f"{r.time_seconds:.3f}"
        lines.append(f"{r.rank:>4}  {r.name:<{name_w}}  {r.psnr:>9.4f}  {r.ssim:>7.4f}  {t:>9}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# runs


@dataclass
class RunRecord:
    tool_version: str
    seed: int
    manifest: str
    scenes: list[dict]
    configs: list[dict]
    results: list[dict] = field(default_factory=list)
    leaderboard: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))

    def restore_configs(self) -> list[RestoreConfig]:
        out = []
        for c in self.configs:
            c = dict(c)
            c.pop("hash", None)
            name = c.pop("name", "")
            out.append(replace(RestoreConfig.from_dict(c), name=name))
        return out


@dataclass
class RunOutput:
    record: RunRecord
    table: list[LeaderboardEntry]
    timings: dict[str, list[float]]
    environment: dict


def _restore_scene(manifest_path: Path, scene, config: RestoreConfig, results_dir: Path | None) -> ImageScore:
    try:
        raw = load_raw(resolve(manifest_path, scene.raw), scene.width, scene.height)
        label = read_rgb(resolve(manifest_path, scene.label))
        out = restore(raw, config)
        if results_dir is not None:
            write_rgb(results_dir / f"{scene.name}.png", out)
        return ImageScore(scene.name, psnr(out, label), ssim(out, label))
    except Exception as exc:
        raise SceneError(scene.name, exc) from exc


def run_experiment(
    manifest_path,
    configs: Sequence[RestoreConfig],
    *,
    seed: int = 0,
    threads: int = 1,
    bench_repeats: int = 0,
    results_root=None,
) -> RunOutput:
    """Restore, score and rank every config over every scene of a manifest."""
    if not configs:
        raise ValueError("need at least one RestoreConfig")
    manifest_path = Path(manifest_path)
    scenes = read_manifest(manifest_path)
    names = [c.label for c in configs]
    if len(set(names)) != len(names):
        raise ValueError(f"config names must be unique, got {names}")

    reports: list[MetricReport] = []
    for cfg in configs:
        results_dir = None
        if results_root is not None:
            results_dir = Path(results_root) / cfg.label.replace("/", "_")
            results_dir.mkdir(parents=True, exist_ok=True)
        job = lambda s, cfg=cfg, rd=results_dir: _restore_scene(manifest_path, s, cfg, rd)  # noqa: E731
        if threads > 1 and len(scenes) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                scores = list(pool.map(job, scenes))
        else:
            scores = [job(s) for s in scenes]
        reports.append(MetricReport(scores))
        log.info("%s: %d scenes restored", cfg.label, len(scores))

    timings: dict[str, list[float]] = {}
    if bench_repeats > 0:
        raw = bench_input(seed=seed)
        for cfg in configs:
            timings[cfg.label] = time_samples(cfg, repeats=bench_repeats, raw=raw)

    def median_time(cfg):
        return statistics.median(timings[cfg.label]) if cfg.label in timings else None

    ranked_plain = leaderboard((c.label, r, None) for c, r in zip(configs, reports)) if scenes else []
    ranked = (
        leaderboard((c.label, r, median_time(c)) for c, r in zip(configs, reports)) if scenes else []
    )
    record = RunRecord(
        tool_version=__version__,
        seed=seed,
        manifest=manifest_path.name,
        scenes=[{"name": s.name, "seed": s.seed, "width": s.width, "height": s.height} for s in scenes],
        configs=[{**c.to_dict(), "name": c.label, "hash": c.digest()} for c in configs],
        results=[{"config": c.label, **r.to_dict()} for c, r in zip(configs, reports)],
        leaderboard=[asdict(e) for e in ranked_plain],
    )
    env = environment(threads)
    env["timing_note"] = TIMING_NOTE
    env["timings"] = timings
    env["timed_leaderboard"] = [asdict(e) for e in ranked] if timings else []
    return RunOutput(record, ranked, timings, env)


def replay(record: RunRecord, manifest_path, threads: int = 1) -> RunRecord:
    """Re-execute a recorded run; per-image metrics must match the record."""
    return run_experiment(manifest_path, record.restore_configs(), seed=record.seed, threads=threads).record
