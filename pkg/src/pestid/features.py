"""Extracted-feature persistence.

Binary layout: magic "PPNFEAT1", then u32 backbone-name length + UTF-8
bytes, u32 D, u32 N, then N*D float32 little-endian row-major, then N
int32 little-endian label indices. Sample ids, split tag, class names and
provenance travel in a JSON sidecar at ``<path>.json``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import dumps_canonical

MAGIC = b"PPNFEAT1"


@dataclass
class FeatureMatrix:
    backbone: str
    features: np.ndarray            # (N, D) float32
    labels: np.ndarray              # (N,) int32
    sample_ids: list[str]
    split: str = "unassigned"
    class_names: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise ValueError(f"{n} feature rows but {self.labels.shape[0]} labels")
        if len(self.sample_ids) != n:
            raise ValueError(f"{n} feature rows but {len(self.sample_ids)} sample ids")
        if n and not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        if self.class_names:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if self.num_samples else 0


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def save_features(fm: FeatureMatrix, path: str | Path) -> None:
    path = Path(path)
    name = fm.backbone.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", len(name), fm.feature_dim, fm.num_samples))
        fh.write(name)
        fh.write(fm.features.astype("<f4", copy=False).tobytes())
        fh.write(fm.labels.astype("<i4", copy=False).tobytes())
    meta = {
        "sample_ids": fm.sample_ids,
        "split": fm.split,
        "class_names": fm.class_names,
        "provenance": fm.provenance,
    }
    sidecar_path(path).write_text(dumps_canonical(meta))


def load_features(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path} is not a feature matrix file (bad magic)")
    name_len, dim, count = struct.unpack_from("<III", data, 8)
    offset = 8 + 12
    backbone = data[offset:offset + name_len].decode("utf-8")
    offset += name_len
    feat_bytes = count * dim * 4
    features = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
    features = features.reshape(count, dim).astype(np.float32)
    offset += feat_bytes
    labels = np.frombuffer(data, dtype="<i4", count=count, offset=offset).astype(np.int32)

    meta_file = sidecar_path(path)
    if meta_file.exists():
        meta = json.loads(meta_file.read_text())
    else:
        meta = {"sample_ids": [""] * count, "split": "unassigned", "class_names": []}
    return FeatureMatrix(
        backbone=backbone,
        features=features,
        labels=labels,
        sample_ids=list(meta.get("sample_ids", [])),
        split=meta.get("split", "unassigned"),
        class_names=list(meta.get("class_names", [])),
        provenance=meta.get("provenance", {}),
    )
