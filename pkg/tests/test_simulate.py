import numpy as np
import pytest

from hybridevs.pattern import DEFAULT_PATTERN
from hybridevs.rawio import RAW_MAX, read_manifest, read_mask, read_rgb
from hybridevs.simulate import (
    DefectModel,
    augment,
    defect_count,
    draw_transform,
    generate_dataset,
    inject_defects,
    mosaic,
    simulate_pair,
    transform,
)

from conftest import write_labels
from oracles import mosaic_pixelwise


def test_mosaic_gray():
    raw = mosaic(np.full((8, 8, 3), 128, np.uint8))
    ev = DEFAULT_PATTERN.event_mask(8, 8)
    assert (raw[~ev] == 514).all() and (raw[ev] == 0).all()


def test_mosaic_pure_red():
    raw = mosaic(np.broadcast_to(np.array([255, 0, 0], np.uint8), (8, 8, 3)))
    colors = DEFAULT_PATTERN.color_map(8, 8)
    ev = DEFAULT_PATTERN.event_mask(8, 8)
    assert (raw[(colors == 0) & ~ev] == 1023).all()
    assert (raw[colors != 0] == 0).all()


def test_mosaic_matches_pixelwise_oracle(rng):
    for _ in range(25):
        img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        assert np.array_equal(mosaic(img), mosaic_pixelwise(img))
    img = rng.integers(0, 256, (7, 11, 3), dtype=np.uint8)
    assert np.array_equal(mosaic(img), mosaic_pixelwise(img))


def test_density_zero_is_identity(rng):
    raw = rng.integers(0, 1024, (12, 12)).astype(np.uint16)
    out, mask = inject_defects(raw, DEFAULT_PATTERN.event_mask(12, 12), DefectModel(0.0))
    assert np.array_equal(out, raw) and not mask.any()


def test_defect_count_example():
    raw = mosaic(np.full((100, 100, 3), 90, np.uint8))
    events = DEFAULT_PATTERN.event_mask(100, 100)
    assert events.sum() == 1250
    assert defect_count(0.01, 8750) == 88
    _, mask = inject_defects(raw, events, DefectModel(0.01, "stuck-high", seed=5))
    assert mask.sum() == 88


@pytest.mark.parametrize("mode", ["stuck-low", "stuck-high", "uniform"])
def test_defects_respect_events_and_mode(rng, mode):
    raw = rng.integers(1, 1023, (37, 29)).astype(np.uint16)
    events = DEFAULT_PATTERN.event_mask(29, 37)
    out, mask = inject_defects(raw, events, DefectModel(0.05, mode, seed=11))
    assert not (mask & events).any()
    assert mask.sum() == defect_count(0.05, int((~events).sum()))
    assert np.array_equal(out[~mask], raw[~mask])
    if mode == "stuck-low":
        assert (out[mask] == 0).all()
    elif mode == "stuck-high":
        assert (out[mask] == RAW_MAX).all()
    else:
        assert out.max() <= RAW_MAX


def test_same_seed_same_defects(rng):
    raw = rng.integers(0, 1024, (20, 20)).astype(np.uint16)
    ev = DEFAULT_PATTERN.event_mask(20, 20)
    a = inject_defects(raw, ev, DefectModel(0.1, "uniform", 3))
    b = inject_defects(raw, ev, DefectModel(0.1, "uniform", 3))
    c = inject_defects(raw, ev, DefectModel(0.1, "uniform", 4))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[1], c[1])


def test_augment_deterministic_and_aligned(rng):
    label = rng.integers(0, 256, (12, 20, 3), dtype=np.uint8)
    model = DefectModel(0.02, "uniform", 9)
    for seed in range(8):
        p = augment(label, DEFAULT_PATTERN, model, seed)
        q = augment(label, DEFAULT_PATTERN, model, seed)
        assert np.array_equal(p.input, q.input) and np.array_equal(p.label, q.label)
        clean = mosaic(p.label)
        assert np.array_equal(p.input[~p.defects], clean[~p.defects])
        rotation, flip = draw_transform(seed)
        assert np.array_equal(p.label, transform(label, rotation, flip))
        assert p.input.shape == ((20, 12) if rotation % 2 else (12, 20))


def test_identity_draw_equals_direct_simulation(rng):
    label = rng.integers(0, 256, (8, 12, 3), dtype=np.uint8)
    model = DefectModel(0.05, "stuck-low", 1)
    seed = next(s for s in range(100) if draw_transform(s) == (0, False))
    p = augment(label, DEFAULT_PATTERN, model, seed)
    q = simulate_pair(label, DEFAULT_PATTERN, model)
    assert np.array_equal(p.input, q.input) and np.array_equal(p.label, label)


def test_quarter_turn_swaps_dimensions(rng):
    label = rng.integers(0, 256, (6, 10, 3), dtype=np.uint8)
    assert transform(label, 1, False).shape == (10, 6, 3)
    assert transform(label, 1, True).shape == (10, 6, 3)


def test_generate_dataset(tmp_path):
    labels = write_labels(tmp_path / "labels", 3, 20, 12)
    entries = generate_dataset(labels, tmp_path / "a", model=DefectModel(0.02), seed=5)
    assert len(entries) == 3
    assert len(list((tmp_path / "a" / "inputs").glob("*.bin"))) == 3
    assert read_manifest(tmp_path / "a" / "manifest.json") == entries
    for e in entries:
        label = read_rgb(tmp_path / "a" / e.label)
        assert label.shape == (e.height, e.width, 3)
        assert read_mask(tmp_path / "a" / e.events).sum() == DEFAULT_PATTERN.event_mask(e.width, e.height).sum()


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_dataset_reproducible_and_thread_invariant(tmp_path):
    labels = write_labels(tmp_path / "labels", 5, 16, 12)
    for name, threads in (("a", 1), ("b", 1), ("c", 4)):
        generate_dataset(labels, tmp_path / name, model=DefectModel(0.05), seed=2, augment_labels=True, threads=threads)
    a = _tree_bytes(tmp_path / "a")
    assert a == _tree_bytes(tmp_path / "b") == _tree_bytes(tmp_path / "c")


def test_generate_dataset_empty_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    assert generate_dataset(tmp_path / "empty", tmp_path / "out") == []
    assert read_manifest(tmp_path / "out" / "manifest.json") == []


def test_generate_dataset_names_bad_file(tmp_path):
    labels = write_labels(tmp_path / "labels", 1)
    (labels / "broken.png").write_bytes(b"junk")
    with pytest.raises(Exception, match="broken.png"):
        generate_dataset(labels, tmp_path / "out")
