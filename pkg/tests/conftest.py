"""Shared fixtures: a tiny separable image dataset and a toy backbone graph."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from pestid.dataset import ingest
from pestid.onnxlite import proto

# two color-coded classes, enough per class to give every split a member
FIXTURE_CLASSES = ("aphid", "beetle")
IMAGES_PER_CLASS = 8
IMAGE_SIZE = 24


def make_image_dataset(root, classes=FIXTURE_CLASSES, per_class=IMAGES_PER_CLASS,
                       size=IMAGE_SIZE, seed=1234):
    """Class-per-folder PNG tree; class identity is carried by color."""
    rng = np.random.default_rng(seed)
    for class_index, name in enumerate(classes):
        class_dir = root / name
        class_dir.mkdir(parents=True)
        for i in range(per_class):
            pixels = rng.integers(0, 60, size=(size, size, 3), dtype=np.uint8)
            channel = class_index % 3
            pixels[..., channel] = rng.integers(160, 255, size=(size, size))
            Image.fromarray(pixels).save(class_dir / f"img_{i:02d}.png")
    return root


@pytest.fixture
def image_dataset(tmp_path):
    return make_image_dataset(tmp_path / "dataset")


@pytest.fixture
def image_manifest(image_dataset):
    return ingest(image_dataset)


def make_toy_graph(path, feature_dim=8, in_channels=3, seed=7, name="ToyNet"):
    """Conv -> Relu -> GAP -> Flatten graph with fixed random weights."""
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 0.2, size=(feature_dim, in_channels, 3, 3)).astype(np.float32)
    b = rng.normal(0, 0.1, size=(feature_dim,)).astype(np.float32)
    graph = proto.Graph(
        name=name,
        nodes=[
            proto.Node("Conv", ["input", "conv_w", "conv_b"], ["conv_out"],
                       {"kernel_shape": [3, 3], "strides": [2, 2],
                        "pads": [1, 1, 1, 1], "group": 1, "dilations": [1, 1]}),
            proto.Node("Relu", ["conv_out"], ["relu_out"]),
            proto.Node("GlobalAveragePool", ["relu_out"], ["pooled"]),
            proto.Node("Flatten", ["pooled"], ["features"], {"axis": 1}),
        ],
        initializers={"conv_w": w, "conv_b": b},
        inputs=[proto.ValueInfo("input", 1, (1, 3, "h", "w"))],
        outputs=[proto.ValueInfo("features", 1, (1, feature_dim))],
    )
    proto.save_model(proto.Model(graph), path)
    return path


def write_sidecar(graph_path, name="ToyNet", feature_dim=8,
                  preprocessing=None, input_size=224):
    import json

    sidecar = graph_path.with_suffix(graph_path.suffix + ".json")
    sidecar.write_text(json.dumps({
        "name": name,
        "feature_dim": feature_dim,
        "preprocessing": preprocessing or {"kind": "scale_minus1_1"},
        "input_size": input_size,
    }))
    return sidecar


@pytest.fixture
def toy_backbone(tmp_path):
    graph_path = make_toy_graph(tmp_path / "toy.onnx")
    write_sidecar(graph_path, input_size=32)
    return graph_path
