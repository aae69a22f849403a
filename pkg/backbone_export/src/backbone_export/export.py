"""Export entry points: the five supported architectures plus sidecars.

Each export produces ``<name>.onnx`` (input 1x3xSxS float32, output (1, D),
global average pooling baked in) and ``<name>.onnx.json`` recording the
feature dimension and the input normalization the source weights expect.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .convert import model_to_onnx_bytes

IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]

# feature dim and canonical preprocessing per architecture family
ARCHITECTURES = {
    "MobileNetV2": (1280, {"kind": "scale_minus1_1"}),
    "NASNetLarge": (4032, {"kind": "scale_minus1_1"}),
    "Xception": (2048, {"kind": "scale_minus1_1"}),
    "DenseNet201": (1920, {"kind": "mean_std", "mean": IMAGENET_MEAN,
                           "std": IMAGENET_STD}),
    "InceptionV3": (2048, {"kind": "scale_minus1_1"}),
}


@dataclass(frozen=True)
class ExportSpec:
    name: str
    out_dir: Path
    weights: str = "imagenet"       # "imagenet" or "random"
    seed: int = 0                   # seeds random weights
    input_size: int = 224

    @property
    def graph_path(self) -> Path:
        return Path(self.out_dir) / f"{self.name}.onnx"

    @property
    def sidecar_path(self) -> Path:
        return Path(self.out_dir) / f"{self.name}.onnx.json"


def build_keras_model(spec: ExportSpec):
    import keras

    if spec.name not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {spec.name!r}; expected one of "
                         f"{sorted(ARCHITECTURES)}")
    # reset auto-naming counters so repeated exports are byte-identical
    keras.backend.clear_session()
    builder = getattr(keras.applications, spec.name)
    if spec.weights == "random":
        keras.utils.set_random_seed(spec.seed)
        weights = None
    elif spec.weights == "imagenet":
        weights = "imagenet"
    else:
        raise ValueError(f"weights must be 'imagenet' or 'random', got {spec.weights!r}")
    return builder(include_top=False, weights=weights,
                   input_shape=(spec.input_size, spec.input_size, 3), pooling="avg")


def export_backbone(spec: ExportSpec) -> tuple[Path, Path]:
    """Build, convert and write one backbone; aborts before writing anything
    if the pooled output dimension does not match the published value."""
    import keras

    if spec.name not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {spec.name!r}; expected one of "
                         f"{sorted(ARCHITECTURES)}")
    expected_dim, preprocessing = ARCHITECTURES[spec.name]
    model = build_keras_model(spec)
    if model.output_shape[-1] != expected_dim:
        raise ValueError(f"{spec.name}: source model emits {model.output_shape[-1]} "
                         f"features, expected {expected_dim}")
    blob, onnx_dim = model_to_onnx_bytes(model, graph_name=spec.name)
    if onnx_dim != expected_dim:
        raise ValueError(f"{spec.name}: converted graph emits {onnx_dim} features, "
                         f"expected {expected_dim}")

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec.graph_path.write_bytes(blob)
    weights_tag = "imagenet" if spec.weights == "imagenet" else f"random(seed={spec.seed})"
    sidecar = {
        "name": spec.name,
        "feature_dim": expected_dim,
        "preprocessing": preprocessing,
        "input_size": spec.input_size,
        "weights": weights_tag,
        "keras_version": keras.__version__,
    }
    spec.sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return spec.graph_path, spec.sidecar_path
