"""Frozen backbone inference: preprocessing plus pooled feature extraction.

Backbones are ONNX graphs (input 1x3xSxS float32, output (1, D)) with a
JSON sidecar recording the name, feature dimension and the input
normalization the source framework expects. Nothing here is trainable, so
extraction is bitwise repeatable.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .dataset import DatasetManifest, Sample
from .features import FeatureMatrix
from .onnxlite import GraphRunner

# Pooled feature width per supported architecture; C*D + C of the head
# must reproduce the published trainable-parameter counts exactly.
FEATURE_DIMS = {
    "MobileNetV2": 1280,
    "NASNetLarge": 4032,
    "Xception": 2048,
    "DenseNet201": 1920,
    "InceptionV3": 2048,
}

PREPROCESSING_KINDS = ("scale_minus1_1", "scale_0_1", "mean_std")


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    graph_path: str
    feature_dim: int
    preprocessing: dict
    input_size: int = 224

    def __post_init__(self) -> None:
        kind = self.preprocessing.get("kind")
        if kind not in PREPROCESSING_KINDS:
            raise ValueError(f"unknown preprocessing kind {kind!r}")
        if kind == "mean_std":
            mean = self.preprocessing.get("mean")
            std = self.preprocessing.get("std")
            if mean is None or std is None or len(mean) != 3 or len(std) != 3:
                raise ValueError("mean_std preprocessing needs 3-channel mean and std")
        if self.input_size <= 0:
            raise ValueError("input_size must be positive")
        if self.feature_dim <= 0:
            raise ValueError("feature_dim must be positive")


def load_spec(graph_path: str | Path, sidecar: str | Path | None = None) -> BackboneSpec:
    """Read a backbone spec from its sidecar (default: ``<graph>.json``)."""
    graph_path = Path(graph_path)
    sidecar = Path(sidecar) if sidecar else graph_path.with_suffix(graph_path.suffix + ".json")
    meta = json.loads(Path(sidecar).read_text())
    return BackboneSpec(
        name=meta["name"],
        graph_path=str(graph_path),
        feature_dim=int(meta["feature_dim"]),
        preprocessing=meta["preprocessing"],
        input_size=int(meta.get("input_size", 224)),
    )


def normalize(pixels: np.ndarray, preprocessing: dict) -> np.ndarray:
    """Map pixel values (0..255 domain) to the network's input scale."""
    x = pixels.astype(np.float32)
    kind = preprocessing["kind"]
    if kind == "scale_minus1_1":
        return x / np.float32(127.5) - np.float32(1.0)
    if kind == "scale_0_1":
        return x / np.float32(255.0)
    mean = np.asarray(preprocessing["mean"], dtype=np.float32)
    std = np.asarray(preprocessing["std"], dtype=np.float32)
    return (x / np.float32(255.0) - mean) / std


def preprocess(image: np.ndarray, spec: BackboneSpec) -> np.ndarray:
    """Resize to the spec's input size and normalize; returns (3, S, S) float32.

    Accepts uint8 or float arrays in the 0..255 domain, RGB channel order.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    size = spec.input_size
    resized = kernels.resize_bilinear(image.astype(np.float32), size, size)
    return normalize(resized, spec.preprocessing).transpose(2, 0, 1)


def _load_image(sample: Sample) -> np.ndarray:
    try:
        with Image.open(sample.path) as img:
            return np.asarray(img.convert("RGB"))
    except Exception as exc:
        raise RuntimeError(f"failed to decode sample {sample.id}: {exc}") from exc


def extract(manifest: DatasetManifest, spec: BackboneSpec, split: str,
            workers: int = 1, provenance: dict | None = None) -> FeatureMatrix:
    """Pooled features for every sample of ``split``, in manifest order."""
    samples = manifest.split_samples(split)
    runner = GraphRunner.from_path(spec.graph_path)

    declared = runner.output_shape()
    if declared is not None and declared[-1] != spec.feature_dim:
        raise ValueError(
            f"graph output dimension {declared[-1]} does not match "
            f"spec feature_dim {spec.feature_dim}")

    def one(sample: Sample) -> np.ndarray:
        x = preprocess(_load_image(sample), spec)[None, ...]
        try:
            out = runner.run({runner.graph.inputs[0].name: x})[0]
        except Exception as exc:
            raise RuntimeError(f"inference failed on sample {sample.id}: {exc}") from exc
        row = np.asarray(out, dtype=np.float32).reshape(-1)
        if row.shape[0] != spec.feature_dim:
            raise ValueError(
                f"graph produced dimension {row.shape[0]} but spec says "
                f"{spec.feature_dim} (sample {sample.id})")
        return row

    if not samples:
        rows = np.zeros((0, spec.feature_dim), dtype=np.float32)
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = np.stack(list(pool.map(one, samples)))
    else:
        rows = np.stack([one(s) for s in samples])

    return FeatureMatrix(
        backbone=spec.name,
        features=rows,
        labels=np.array([s.label for s in samples], dtype=np.int32),
        sample_ids=[s.id for s in samples],
        split=split,
        class_names=[l.name for l in manifest.labels],
        provenance=provenance or {},
    )
