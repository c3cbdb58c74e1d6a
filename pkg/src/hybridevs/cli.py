"""Command line entry point: ``hybridevs {simulate,restore,score,bench,run}``.

On failure the process exits non-zero after printing one JSON line to
stderr: ``{"error": "<ExceptionType>", "message": "..."}``.
"""
from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .harness import (
    BENCH_HEIGHT,
    BENCH_WIDTH,
    TIMING_NOTE,
    environment,
    format_table,
    run_experiment,
    time_samples,
)
from .metrics import score_pair, score_set
from .pattern import DEFAULT_PATTERN, PatternSpec
from .rawio import load_raw, read_manifest, resolve, write_rgb
from .restore import DEMOSAIC_MODES, DPC_MODES, RestoreConfig, restore
from .simulate import DEFECT_MODES, DefectModel, generate_dataset

log = logging.getLogger("hybridevs")


def _pattern(args) -> PatternSpec:
    return PatternSpec.load(args.pattern) if args.pattern else DEFAULT_PATTERN


def _config(args, **overrides) -> RestoreConfig:
    kw = dict(
        spec=_pattern(args),
        dpc=args.dpc,
        demosaic=args.demosaic,
        threshold=args.threshold,
        spread_scale=args.spread_scale,
        radius=args.radius,
    )
    kw.update(overrides)
    return RestoreConfig(**kw)


def _emit_json(args, payload) -> None:
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    model = DefectModel(density=args.density, mode=args.mode, seed=args.seed)
    entries = generate_dataset(
        args.labels, args.out, _pattern(args), model, seed=args.seed, augment_labels=args.augment, threads=args.threads
    )
    print(f"simulated {len(entries)} scenes -> {Path(args.out) / 'manifest.json'}")
    _emit_json(args, {"manifest": str(Path(args.out) / "manifest.json"), "scenes": [e.name for e in entries]})
    return 0


def _restore_jobs(args) -> list[tuple[str, Path, int, int]]:
    src = Path(args.input)
    if src.suffix == ".json":
        return [(s.name, resolve(src, s.raw), s.width, s.height) for s in read_manifest(src)]
    if args.width is None or args.height is None:
        raise ValueError("--width and --height are required for .bin input")
    files = sorted(src.glob("*.bin")) if src.is_dir() else [src]
    if src.is_dir() and not files:
        raise FileNotFoundError(f"no .bin files in {src}")
    return [(f.stem, f, args.width, args.height) for f in files]


def cmd_restore(args) -> int:
    config = _config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = _restore_jobs(args)

    def one(job):
        name, path, w, h = job
        dest = out_dir / f"{name}.png"
        write_rgb(dest, restore(load_raw(path, w, h), config))
        return str(dest)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            written = list(pool.map(one, jobs))
    else:
        written = [one(j) for j in jobs]
    print(f"restored {len(written)} frames -> {out_dir}")
    _emit_json(args, {"config": config.to_dict(), "outputs": written})
    return 0


def cmd_score(args) -> int:
    results, labels = Path(args.results), Path(args.labels)
    if results.is_file():
        report = score_pair(results, labels)
    else:
        report = score_set(results, labels, threads=args.threads)
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _emit_json(args, report.to_dict())
    print(f"{len(report.per_image)} images  PSNR {report.psnr:.4f} dB  SSIM {report.ssim:.4f}")
    return 0


def cmd_bench(args) -> int:
    config = _config(args)
    samples = time_samples(config, args.width, args.height, args.repeats, args.seed)
    median = statistics.median(samples)
    payload = {
        "width": args.width,
        "height": args.height,
        "repeats": args.repeats,
        "median_seconds": median,
        "samples": samples,
        "config": config.to_dict(),
        "environment": environment(args.threads),
        "note": TIMING_NOTE,
    }
    print(f"# {TIMING_NOTE}")
    print(f"restore {args.width}x{args.height}: median {median:.3f} s over {args.repeats} runs ({payload['environment']['backend']})")
    _emit_json(args, payload)
    return 0


def _run_configs(args) -> list[RestoreConfig]:
    base = _config(args)
    if not args.configs:
        return [replace(base, demosaic=m, name=m) for m in ("bilinear", "gradient-corrected-linear")]
    out = []
    for d in json.loads(Path(args.configs).read_text(encoding="utf-8")):
        d = dict(d)
        unknown = set(d) - {"name", "dpc", "demosaic", "threshold", "spread_scale", "radius", "inpaint"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        out.append(replace(base, **d))
    return out


def cmd_run(args) -> int:
    out = run_experiment(
        args.manifest,
        _run_configs(args),
        seed=args.seed,
        threads=args.threads,
        bench_repeats=args.bench_repeats,
        results_root=args.results,
    )
    sys.stdout.write(format_table(out.table))
    if args.json:
        Path(args.json).write_text(out.record.to_json(), encoding="utf-8")
        env_path = Path(args.json).with_suffix(".env.json")
        env_path.write_text(json.dumps(out.environment, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pattern", help="4x4 pattern file (R/G/B/E codes); default built-in")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker threads over scenes")
    common.add_argument("--json", metavar="OUT", help="write a machine-readable summary here")
    common.add_argument("-v", "--verbose", action="store_true")

    restore_opts = argparse.ArgumentParser(add_help=False)
    restore_opts.add_argument("--dpc", choices=DPC_MODES, default="both")
    restore_opts.add_argument("--demosaic", choices=DEMOSAIC_MODES + ("gcl",), default="gradient-corrected-linear")
    restore_opts.add_argument("--threshold", type=int, default=RestoreConfig.threshold)
    restore_opts.add_argument("--spread-scale", type=float, default=RestoreConfig.spread_scale)
    restore_opts.add_argument("--radius", type=int, default=RestoreConfig.radius)

    p = argparse.ArgumentParser(prog="hybridevs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate HybridEVS inputs from RGB labels")
    s.add_argument("--labels", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--density", type=float, default=DefectModel.density)
    s.add_argument("--mode", choices=DEFECT_MODES, default=DefectModel.mode)
    s.add_argument("--augment", action="store_true", help="random rotation/flip per label")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("restore", parents=[common, restore_opts], help="restore .bin frames to RGB PNG")
    r.add_argument("--input", required=True, help=".bin file, directory of .bin, or manifest.json")
    r.add_argument("--width", type=int)
    r.add_argument("--height", type=int)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_restore)

    sc = sub.add_parser("score", parents=[common], help="PSNR/SSIM of results against labels")
    sc.add_argument("--results", required=True)
    sc.add_argument("--labels", required=True)
    sc.add_argument("--out", help="report JSON")
    sc.add_argument("--csv", help="report CSV")
    sc.set_defaults(func=cmd_score)

    b = sub.add_parser("bench", parents=[common, restore_opts], help="time one full-size restoration")
    b.add_argument("--width", type=int, default=BENCH_WIDTH)
    b.add_argument("--height", type=int, default=BENCH_HEIGHT)
    b.add_argument("--repeats", type=int, default=3)
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("run", parents=[common, restore_opts], help="restore, score and rank configs over a manifest")
    x.add_argument("--manifest", required=True)
    x.add_argument("--configs", help="JSON list of config overrides, each with a unique name")
    x.add_argument("--results", help="directory for restored PNGs (one subdirectory per config)")
    x.add_argument("--bench-repeats", type=int, default=0, help="also time each config (written to the .env.json sidecar)")
    x.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
