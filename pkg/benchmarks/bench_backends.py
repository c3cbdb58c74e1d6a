#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on full-frame restoration.

Each backend runs in its own interpreter with HYBRIDEVS_BACKEND set, the
same way a user would select it. Prints one row per backend per stage and
checks that both produce identical output.

    python benchmarks/bench_backends.py --width 1920 --height 1080 --repeats 3
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, statistics, sys, time
from hybridevs import kernels
from hybridevs.harness import bench_input
from hybridevs.restore import RestoreConfig, correct_defects, inpaint_events, bayer_sums, restore

width, height, repeats = map(int, sys.argv[1:4])
raw = bench_input(width, height, seed=0)
cfg = RestoreConfig()
events = cfg.spec.event_mask(width, height)

def timed(fn):
    fn()
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)

stages = {
    "defect correction": lambda: correct_defects(raw, cfg, events),
    "event inpainting": lambda: inpaint_events(raw, events),
    "demosaic sums": lambda: bayer_sums(raw),
    "full restore": lambda: restore(raw, cfg),
}
result = {name: timed(fn) for name, fn in stages.items()}
digest = hashlib.sha256(restore(raw, cfg).tobytes()).hexdigest()
print(json.dumps({"backend": kernels.BACKEND, "stages": result, "digest": digest}))
"""


def run_backend(backend, width, height, repeats):
    env = dict(os.environ, HYBRIDEVS_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(width), str(height), str(repeats)],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise SystemExit(f"{backend} worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=1920)
    ap.add_argument("--height", type=int, default=1080)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--backends", nargs="+", default=["numba", "numpy"])
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    results = [run_backend(b, args.width, args.height, args.repeats) for b in args.backends]

    stages = list(results[0]["stages"])
    print(f"restore {args.width}x{args.height}, median of {args.repeats} runs after warm-up (seconds)")
    print(f"{'stage':<20}" + "".join(f"{r['backend']:>12}" for r in results))
    for s in stages:
        print(f"{s:<20}" + "".join(f"{r['stages'][s]:>12.4f}" for r in results))
    if len(results) > 1:
        base = results[0]["stages"]["full restore"]
        for r in results[1:]:
            print(f"{r['backend']} / {results[0]['backend']} full restore: {r['stages']['full restore'] / base:.2f}x")
    digests = {r["digest"] for r in results}
    print("outputs identical across backends:", len(digests) == 1)

    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump({"width": args.width, "height": args.height, "repeats": args.repeats, "results": results}, f, indent=2)
    return 0 if len(digests) == 1 else 1


if __name__ == "__main__":
    sys.exit(main())
