"""Dataset ingestion and deterministic stratified splitting.

A dataset is a directory with one subdirectory per class, each holding
image files. Ingestion produces a manifest (every sample's path, label and
split assignment); splitting assigns train/test floors per class and gives
validation the remainder.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .seeding import stream

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test", "unassigned")
MIN_CLASS_SIZE = 3


@dataclass(frozen=True)
class ClassLabel:
    index: int
    name: str


@dataclass
class Sample:
    id: str
    path: str
    label: int
    split: str = "unassigned"
    # set only on augmentation-generated samples
    source_id: str | None = None
    draw_seed: int | None = None


@dataclass
class DatasetManifest:
    labels: list[ClassLabel]
    samples: list[Sample]
    split_ratios: tuple[float, float, float] | None = None  # (train, test, validation)
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def class_count(self) -> int:
        return len(self.labels)

    def split_samples(self, split: str) -> list[Sample]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [s for s in self.samples if s.split == split]

    def counts_by_split(self) -> dict[str, int]:
        counts = {name: 0 for name in SPLITS}
        for s in self.samples:
            counts[s.split] += 1
        return counts

    def validate(self) -> None:
        if not self.samples:
            raise ValueError("manifest has no samples")
        names = [l.name for l in self.labels]
        if len(set(names)) != len(names):
            raise ValueError("class names are not unique")
        if [l.index for l in self.labels] != list(range(len(self.labels))):
            raise ValueError("class indices must be contiguous from 0")
        per_class = {l.index: 0 for l in self.labels}
        ids = set()
        for s in self.samples:
            if s.label not in per_class:
                raise ValueError(f"sample {s.id} has unknown label {s.label}")
            if s.split not in SPLITS:
                raise ValueError(f"sample {s.id} has unknown split {s.split!r}")
            if s.id in ids:
                raise ValueError(f"duplicate sample id {s.id}")
            ids.add(s.id)
            per_class[s.label] += 1
        empty = [self.labels[i].name for i, n in per_class.items() if n == 0]
        if empty:
            raise ValueError(f"classes with no samples: {', '.join(empty)}")
        if self.split_ratios is not None:
            _check_ratios(self.split_ratios)

    def to_dict(self) -> dict:
        doc = {
            "seed": self.seed,
            "ratios": list(self.split_ratios) if self.split_ratios else None,
            "labels": [{"index": l.index, "name": l.name} for l in self.labels],
            "samples": [_sample_dict(s) for s in self.samples],
        }
        if self.provenance:
            doc["provenance"] = self.provenance
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        labels = [ClassLabel(d["index"], d["name"]) for d in doc["labels"]]
        samples = [
            Sample(d["id"], d["path"], d["label"], d["split"],
                   d.get("source_id"), d.get("draw_seed"))
            for d in doc["samples"]
        ]
        ratios = tuple(doc["ratios"]) if doc.get("ratios") else None
        return cls(labels, samples, ratios, doc.get("seed"), doc.get("provenance", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dumps_canonical(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sample_dict(s: Sample) -> dict:
    d = {"id": s.id, "path": s.path, "label": s.label, "split": s.split}
    if s.source_id is not None:
        d["source_id"] = s.source_id
        d["draw_seed"] = s.draw_seed
    return d


def dumps_canonical(doc: dict) -> str:
    """Stable JSON encoding so equal inputs give byte-identical artifacts."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _is_image(path: Path) -> bool:
    try:
        with Image.open(path) as img:
            img.verify()
        return True
    except Exception:
        return False


def scan(root: str | Path) -> tuple[DatasetManifest, list[Path]]:
    """Walk a class-per-folder tree; return (manifest, skipped files).

    Labels are ordered lexicographically by folder name so class indices
    are stable across machines. Files that do not decode as images are
    skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"dataset root {root} contains no class directories")

    labels = [ClassLabel(i, d.name) for i, d in enumerate(class_dirs)]
    samples: list[Sample] = []
    skipped: list[Path] = []
    for label, class_dir in zip(labels, class_dirs):
        files = sorted(p for p in class_dir.iterdir() if p.is_file())
        kept = 0
        for p in files:
            if _is_image(p):
                sample_id = f"{class_dir.name}/{p.name}"
                samples.append(Sample(sample_id, str(p), label.index))
                kept += 1
            else:
                skipped.append(p)
                log.warning("skipping undecodable file %s", p)
        if kept == 0:
            raise ValueError(f"class directory {class_dir.name!r} has no decodable images")
    if skipped:
        log.warning("skipped %d undecodable file(s)", len(skipped))
    return DatasetManifest(labels, samples), skipped


def ingest(root: str | Path) -> DatasetManifest:
    """Build an unsplit manifest from a class-per-folder image directory."""
    manifest, _ = scan(root)
    manifest.validate()
    return manifest


def _check_ratios(ratios: tuple[float, float, float]) -> None:
    if len(ratios) != 3:
        raise ValueError(f"expected three split ratios, got {len(ratios)}")
    if any(not (0.0 < r < 1.0) for r in ratios):
        raise ValueError(f"split ratios must each lie in (0, 1): {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")


def split_counts(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Per-class sizes: train and test floored, validation takes the remainder."""
    n_train = math.floor(ratios[0] * n)
    n_test = math.floor(ratios[1] * n)
    return n_train, n_test, n - n_train - n_test


def stratified_split(manifest: DatasetManifest,
                     ratios: tuple[float, float, float],
                     seed: int) -> DatasetManifest:
    """Assign every sample to train/test/validation, stratified per class.

    ``ratios`` is (train, test, validation). Within each class the
    assignment order is a seeded uniform shuffle, so the same
    (manifest, ratios, seed) always yields the identical manifest.
    """
    _check_ratios(ratios)
    manifest.validate()
    if any(s.split != "unassigned" for s in manifest.samples):
        raise ValueError("manifest already has split assignments")

    by_class: dict[int, list[int]] = {l.index: [] for l in manifest.labels}
    for i, s in enumerate(manifest.samples):
        by_class[s.label].append(i)
    for label in manifest.labels:
        if len(by_class[label.index]) < MIN_CLASS_SIZE:
            raise ValueError(
                f"class {label.name!r} has only {len(by_class[label.index])} samples; "
                f"at least {MIN_CLASS_SIZE} are required for a stratified split")

    assignment: dict[int, str] = {}
    for label in manifest.labels:
        indices = by_class[label.index]
        order = stream(seed, label.index).permutation(len(indices))
        n_train, n_test, _ = split_counts(len(indices), ratios)
        for rank, j in enumerate(order):
            if rank < n_train:
                part = "train"
            elif rank < n_train + n_test:
                part = "test"
            else:
                part = "validation"
            assignment[indices[j]] = part

    samples = [
        Sample(s.id, s.path, s.label, assignment[i], s.source_id, s.draw_seed)
        for i, s in enumerate(manifest.samples)
    ]
    return DatasetManifest(list(manifest.labels), samples, tuple(ratios), seed,
                           dict(manifest.provenance))
