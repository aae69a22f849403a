"""Shared helpers: quiet TF, feature-file parsing, sidecar preprocessing."""

from __future__ import annotations

import json
import os
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")


def read_feature_file(path: Path) -> tuple[str, np.ndarray, np.ndarray]:
    """Parse the primary pipeline's published feature-matrix layout:
    magic "PPNFEAT1", u32 name length, u32 D, u32 N, name bytes,
    N*D float32 LE, N int32 LE."""
    blob = Path(path).read_bytes()
    assert blob[:8] == b"PPNFEAT1", "unexpected feature file magic"
    name_len, dim, count = struct.unpack_from("<III", blob, 8)
    offset = 20
    backbone = blob[offset:offset + name_len].decode("utf-8")
    offset += name_len
    features = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset)
    offset += count * dim * 4
    labels = np.frombuffer(blob, dtype="<i4", count=count, offset=offset)
    return backbone, features.reshape(count, dim), labels


def apply_sidecar_preprocessing(pixels: np.ndarray, sidecar: dict) -> np.ndarray:
    """Sidecar normalization contract, NHWC float32 (same float32 op order
    as the consumer applies)."""
    x = pixels.astype(np.float32)
    kind = sidecar["preprocessing"]["kind"]
    if kind == "scale_minus1_1":
        return x / np.float32(127.5) - np.float32(1.0)
    if kind == "scale_0_1":
        return x / np.float32(255.0)
    mean = np.asarray(sidecar["preprocessing"]["mean"], dtype=np.float32)
    std = np.asarray(sidecar["preprocessing"]["std"], dtype=np.float32)
    return (x / np.float32(255.0) - mean) / std


def run_primary_cli(*args: str) -> subprocess.CompletedProcess:
    """Invoke the consumer pipeline's CLI in a subprocess."""
    return subprocess.run([sys.executable, "-m", "pestid.cli", *args],
                          capture_output=True, text=True)


def write_random_images(root: Path, count: int = 5, size: int = 224,
                        seed: int = 0) -> list[Path]:
    from PIL import Image

    rng = np.random.default_rng(seed)
    class_dir = root / "samples"
    class_dir.mkdir(parents=True)
    paths = []
    for i in range(count):
        pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        path = class_dir / f"img_{i}.png"
        Image.fromarray(pixels).save(path)
        paths.append(path)
    return paths


def load_sidecar(graph_path: Path) -> dict:
    return json.loads(Path(str(graph_path) + ".json").read_text())
