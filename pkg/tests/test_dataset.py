"""Ingestion and stratified-split contracts."""

import math

import numpy as np
import pytest
from PIL import Image

from pestid.dataset import (
    DatasetManifest,
    ingest,
    scan,
    split_counts,
    stratified_split,
)
from tests.conftest import make_image_dataset

# published per-class image counts for the eight-class pest dataset
PEST_CLASS_COUNTS = (139, 62, 37, 35, 35, 70, 75, 42)
RATIOS = (0.7, 0.15, 0.15)


def synthetic_manifest(counts, tmp_path=None):
    """Manifest with the given per-class sizes; paths are synthetic."""
    from pestid.dataset import ClassLabel, Sample

    labels = [ClassLabel(i, f"class_{i:02d}") for i in range(len(counts))]
    samples = []
    for label, count in zip(labels, counts):
        for j in range(count):
            samples.append(Sample(f"{label.name}/img_{j:03d}.png",
                                  f"/nonexistent/{label.name}/img_{j:03d}.png",
                                  label.index))
    return DatasetManifest(labels, samples)


def test_ingest_counts_and_label_order(image_dataset):
    manifest = ingest(image_dataset)
    assert len(manifest.samples) == 16
    assert [l.name for l in manifest.labels] == ["aphid", "beetle"]
    assert all(s.split == "unassigned" for s in manifest.samples)


def test_ingest_single_image(tmp_path):
    root = make_image_dataset(tmp_path / "one", classes=("only",), per_class=1)
    manifest = ingest(root)
    assert len(manifest.samples) == 1
    assert len(manifest.labels) == 1


def test_scan_skips_undecodable_files(tmp_path):
    root = make_image_dataset(tmp_path / "mixed", classes=("bug",), per_class=3)
    (root / "bug" / "notes.txt").write_text("not an image")
    manifest, skipped = scan(root)
    # independent walk: count files that PIL can open
    decodable = 0
    for p in sorted((root / "bug").iterdir()):
        try:
            with Image.open(p) as img:
                img.verify()
            decodable += 1
        except Exception:
            pass
    assert len(manifest.samples) == decodable == 3
    assert len(skipped) == 1
    assert skipped[0].name == "notes.txt"


def test_empty_class_directory_is_an_error(tmp_path):
    root = make_image_dataset(tmp_path / "bad", classes=("full",), per_class=2)
    (root / "empty_class").mkdir()
    with pytest.raises(ValueError, match="empty_class"):
        ingest(root)


def test_split_counts_floor_rule():
    # hand-applied floor rule for every published class size
    expected_train = [math.floor(0.7 * n) for n in PEST_CLASS_COUNTS]
    expected_test = [math.floor(0.15 * n) for n in PEST_CLASS_COUNTS]
    for n, train_n, test_n in zip(PEST_CLASS_COUNTS, expected_train, expected_test):
        got = split_counts(n, RATIOS)
        assert got == (train_n, test_n, n - train_n - test_n)


def test_split_single_class_of_ten():
    got = split_counts(10, RATIOS)
    assert got == (7, 1, 2)  # train 7, test 1, validation takes the remainder


def test_stratified_split_assigns_each_sample_once():
    manifest = synthetic_manifest(PEST_CLASS_COUNTS)
    result = stratified_split(manifest, RATIOS, seed=42)
    counts = result.counts_by_split()
    assert counts["unassigned"] == 0
    assert sum(counts.values()) == len(result.samples) == sum(PEST_CLASS_COUNTS)

    # per-class counts match the floor-rule oracle exactly
    for label in result.labels:
        class_samples = [s for s in result.samples if s.label == label.index]
        n = len(class_samples)
        train_n, test_n, val_n = split_counts(n, RATIOS)
        assert sum(s.split == "train" for s in class_samples) == train_n
        assert sum(s.split == "test" for s in class_samples) == test_n
        assert sum(s.split == "validation" for s in class_samples) == val_n


def test_no_leakage_between_splits():
    manifest = synthetic_manifest(PEST_CLASS_COUNTS)
    result = stratified_split(manifest, RATIOS, seed=7)
    seen: dict[str, str] = {}
    for s in result.samples:
        assert s.id not in seen
        seen[s.id] = s.split


def test_split_is_deterministic_and_seed_sensitive():
    manifest = synthetic_manifest((20, 30))
    a = stratified_split(manifest, RATIOS, seed=5)
    b = stratified_split(synthetic_manifest((20, 30)), RATIOS, seed=5)
    assert a.to_dict() == b.to_dict()
    c = stratified_split(synthetic_manifest((20, 30)), RATIOS, seed=6)
    assert a.to_dict() != c.to_dict()


def test_manifest_round_trip_is_byte_identical(tmp_path, image_manifest):
    split = stratified_split(image_manifest, RATIOS, seed=3)
    path_a = tmp_path / "a.json"
    path_b = tmp_path / "b.json"
    split.save(path_a)
    DatasetManifest.load(path_a).save(path_b)
    assert path_a.read_bytes() == path_b.read_bytes()


def test_bad_ratios_rejected():
    manifest = synthetic_manifest((10, 10))
    with pytest.raises(ValueError, match="sum to 1"):
        stratified_split(manifest, (0.7, 0.2, 0.2), seed=0)
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        stratified_split(manifest, (1.0, 0.0, 0.0), seed=0)


def test_small_class_rejected_by_name():
    manifest = synthetic_manifest((10, 2))
    with pytest.raises(ValueError, match="class_01"):
        stratified_split(manifest, RATIOS, seed=0)


def test_shuffle_is_uniform_within_class():
    # every sample of a 6-element class should land in train with roughly
    # the same frequency across seeds
    counts = np.zeros(6)
    for seed in range(300):
        result = stratified_split(synthetic_manifest((6, 6)), RATIOS, seed=seed)
        class0 = [s for s in result.samples if s.label == 0]
        for i, s in enumerate(class0):
            if s.split == "train":
                counts[i] += 1
    expected = 300 * split_counts(6, RATIOS)[0] / 6
    assert np.abs(counts - expected).max() < expected * 0.35
