import itertools
import random

import numpy as np
import pytest

from hybridevs import harness
from hybridevs.harness import (
    LeaderboardEntry,
    RunRecord,
    SceneError,
    bench_time,
    format_table,
    leaderboard,
    replay,
    run_experiment,
    time_samples,
)
from hybridevs.metrics import ImageScore, MetricReport
from hybridevs.restore import RestoreConfig

from oracles import REFERENCE_RANKING


def _fake_clock(stamps, log=None):
    it = iter(stamps)

    def clock():
        if log is not None:
            log.append("tick")
        return next(it)

    return clock


def _noop(raw, config):
    return None


def test_median_of_three_samples():
    raw = np.zeros((4, 4), np.uint16)
    clock = _fake_clock([0.0, 1.0, 10.0, 12.0, 20.0, 29.0])
    assert bench_time(RestoreConfig(), repeats=3, raw=raw, restore_fn=_noop, clock=clock) == 2.0


def test_single_repeat_returns_the_sample():
    raw = np.zeros((4, 4), np.uint16)
    assert time_samples(repeats=1, raw=raw, restore_fn=_noop, clock=_fake_clock([5.0, 5.25])) == [0.25]
    with pytest.raises(ValueError):
        time_samples(repeats=0, raw=raw, restore_fn=_noop)


def test_input_prepared_and_warmed_up_before_timing(monkeypatch):
    log = []

    def fake_input(width, height, seed):
        log.append("load")
        return np.zeros((height, width), np.uint16)

    def fake_restore(raw, config):
        log.append("restore")

    monkeypatch.setattr(harness, "bench_input", fake_input)
    time_samples(RestoreConfig(), 8, 4, repeats=2, restore_fn=fake_restore, clock=_fake_clock(range(4), log))
    assert log == ["load", "restore", "tick", "restore", "tick", "tick", "restore", "tick"]


def test_bench_time_real_run_is_positive():
    assert bench_time(RestoreConfig(), width=64, height=32, repeats=2) > 0


def _reference_rows():
    return [(name, (p, s), t) for _, name, p, s, t in REFERENCE_RANKING]


def test_reference_ranking_reproduced():
    rows = _reference_rows()
    random.Random(4).shuffle(rows)
    ranked = leaderboard(rows)
    assert [(e.rank, e.name, e.psnr, e.ssim, e.time_seconds) for e in ranked] == REFERENCE_RANKING
    assert ranked[0].name == "USTC604" and (ranked[0].psnr, ranked[0].ssim) == (44.8464, 0.9854)
    assert ranked[-1].name == "CougerAI" and (ranked[-1].psnr, ranked[-1].ssim) == (41.0736, 0.9752)


def test_ranking_is_permutation_invariant():
    rows = _reference_rows()
    want = [e.name for e in leaderboard(rows)]
    for perm in itertools.islice(itertools.permutations(rows), 0, 5040, 37):
        assert [e.name for e in leaderboard(perm)] == want


def test_single_entry_and_ties():
    assert leaderboard([("only", (30.0, 0.9), None)])[0].rank == 1
    ranked = leaderboard([("b", (40.0, 0.98), 1.0), ("a", (40.0, 0.99), 9.0)])
    assert [e.name for e in ranked] == ["a", "b"]
    ranked = leaderboard([("slow", (40.0, 0.99), 3.0), ("fast", (40.0, 0.99), 1.0), ("untimed", (40.0, 0.99), None)])
    assert [e.name for e in ranked] == ["fast", "slow", "untimed"]
    ranked = leaderboard([("zeta", (1.0, 0.5), 1.0), ("alpha", (1.0, 0.5), 1.0)])
    assert [(e.rank, e.name) for e in ranked] == [(1, "alpha"), (2, "zeta")]
    with pytest.raises(ValueError):
        leaderboard([])


def test_leaderboard_accepts_reports_and_entries():
    rep = MetricReport([ImageScore("x", 33.0, 0.91)])
    ranked = leaderboard([("r", rep, None), LeaderboardEntry(9, "e", 34.0, 0.9)])
    assert [(e.rank, e.name) for e in ranked] == [(1, "e"), (2, "r")]


def test_table_layout():
    text = format_table(leaderboard(_reference_rows()))
    lines = text.splitlines()
    assert lines[0].startswith("#") and "not comparable" in lines[0]
    assert lines[1].split() == ["rank", "name", "PSNR", "SSIM", "Time", "(s)"]
    assert lines[2].split() == ["1", "USTC604", "44.8464", "0.9854", "51.315"]


def _two_configs():
    return [
        RestoreConfig(demosaic="bilinear", name="bilinear"),
        RestoreConfig(demosaic="gradient-corrected-linear", name="gradient-corrected"),
    ]


def test_run_two_configs(dataset, tmp_path):
    out = run_experiment(dataset, _two_configs(), seed=3, results_root=tmp_path / "res")
    assert len(out.table) == 2 and {e.name for e in out.table} == {"bilinear", "gradient-corrected"}
    assert len(list((tmp_path / "res" / "bilinear").glob("*.png"))) == 4
    assert out.timings == {} and "threads" in out.environment
    rec = RunRecord.from_json(out.record.to_json())
    assert rec == out.record


def test_run_is_deterministic_and_thread_invariant(dataset):
    a = run_experiment(dataset, _two_configs(), seed=1).record.to_json()
    b = run_experiment(dataset, _two_configs(), seed=1).record.to_json()
    c = run_experiment(dataset, _two_configs(), seed=1, threads=8).record.to_json()
    assert a == b == c


def test_replay_reproduces_metrics(dataset):
    rec = run_experiment(dataset, _two_configs(), seed=5).record
    again = replay(RunRecord.from_json(rec.to_json()), dataset, threads=3)
    assert again.results == rec.results


def test_timed_run_keeps_report_clean(dataset):
    timed = run_experiment(dataset, _two_configs()[:1], bench_repeats=1)
    plain = run_experiment(dataset, _two_configs()[:1])
    assert timed.record.to_json() == plain.record.to_json()
    assert len(timed.timings["bilinear"]) == 1 and timed.table[0].time_seconds > 0


def test_run_rejects_duplicate_names(dataset):
    with pytest.raises(ValueError):
        run_experiment(dataset, [RestoreConfig(name="x"), RestoreConfig(demosaic="bilinear", name="x")])


def test_scene_failure_names_scene(dataset):
    victim = dataset.parent / "inputs" / "scene_002.bin"
    victim.write_bytes(victim.read_bytes()[:-2])
    with pytest.raises(SceneError, match="scene_002"):
        run_experiment(dataset, _two_configs())


@pytest.mark.xfail(
    strict=True,
    reason="on smooth synthetic gradients the gradient-corrected kernels trail bilinear: the residual error "
    "is dominated by 8-bit label quantization, which the larger corrective taps amplify",
)
def test_gradient_corrected_not_worse_on_smooth_set(tmp_path):
    from conftest import write_labels
    from hybridevs.simulate import DefectModel, generate_dataset

    labels = write_labels(tmp_path / "labels", 20, 96, 64)
    generate_dataset(labels, tmp_path / "sim", model=DefectModel(0.005, "stuck-high"), seed=0)
    out = run_experiment(tmp_path / "sim" / "manifest.json", _two_configs())
    scores = {r["config"]: r["aggregate"]["psnr"] for r in out.record.results}
    assert scores["gradient-corrected"] >= scores["bilinear"]
