"""Stochastic training-set augmentation.

Each augmented image is produced by one resampling pass through a composed
affine map: rotation, zoom about the center, horizontal/vertical shifts,
then optional flips. Outputs are materialized to disk so downstream feature
extraction runs once per image.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .dataset import DatasetManifest, Sample
from .seeding import derive_seed, text_key


@dataclass(frozen=True)
class AugmentationConfig:
    rotation_range: float = 30.0        # degrees, drawn from U(-r, r)
    zoom_range: float = 0.2             # scale drawn from U(1-z, 1+z)
    width_shift_range: float = 0.2      # fraction of width, U(-s, s)
    height_shift_range: float = 0.2     # fraction of height, U(-s, s)
    vertical_flip: bool = True
    horizontal_flip: bool = True
    iterations: int = 1                 # augmentation sweeps over the train split
    copies_per_image: int = 6           # variants per sweep per image
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rotation_range < 0:
            raise ValueError("rotation_range must be >= 0")
        for name in ("zoom_range", "width_shift_range", "height_shift_range"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.copies_per_image < 1:
            raise ValueError("copies_per_image must be >= 1")

    @property
    def variants_per_image(self) -> int:
        return self.iterations * self.copies_per_image


def draw_transform(config: AugmentationConfig, rng: np.random.Generator) -> dict:
    """Sample one set of transform parameters (fixed draw order)."""
    params = {
        "angle_deg": rng.uniform(-config.rotation_range, config.rotation_range),
        "zoom": rng.uniform(1.0 - config.zoom_range, 1.0 + config.zoom_range),
        "shift_x": rng.uniform(-config.width_shift_range, config.width_shift_range),
        "shift_y": rng.uniform(-config.height_shift_range, config.height_shift_range),
        "flip_v": bool(config.vertical_flip and rng.random() < 0.5),
        "flip_h": bool(config.horizontal_flip and rng.random() < 0.5),
    }
    return params


def _mat(a, b, c, d, e, f) -> np.ndarray:
    return np.array([[a, b, c], [d, e, f], [0.0, 0.0, 1.0]], dtype=np.float64)


def inverse_transform_matrix(params: dict, width: int, height: int) -> np.ndarray:
    """2x3 map from destination pixel to source point.

    The image-space transform applies rotation, then zoom, then shifts,
    then flips; sampling therefore composes the inverses in that order.
    All center-relative, with the center at the pixel grid's midpoint so a
    pure flip lands exactly on mirrored pixel centers.
    """
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    to_center = _mat(1, 0, -cx, 0, 1, -cy)
    from_center = _mat(1, 0, cx, 0, 1, cy)

    theta = np.deg2rad(params["angle_deg"])
    cos_t, sin_t = np.cos(-theta), np.sin(-theta)
    rot_inv = from_center @ _mat(cos_t, -sin_t, 0, sin_t, cos_t, 0) @ to_center

    inv_zoom = 1.0 / params["zoom"]
    zoom_inv = from_center @ _mat(inv_zoom, 0, 0, 0, inv_zoom, 0) @ to_center

    shift_inv = _mat(1, 0, -params["shift_x"] * width, 0, 1, -params["shift_y"] * height)

    fh = -1.0 if params["flip_h"] else 1.0
    fv = -1.0 if params["flip_v"] else 1.0
    flip_inv = from_center @ _mat(fh, 0, 0, 0, fv, 0) @ to_center

    full = rot_inv @ zoom_inv @ shift_inv @ flip_inv
    return full[:2, :]


def augment_image(image: np.ndarray, config: AugmentationConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """One augmented variant of ``image`` (H, W, 3), same shape and dtype.

    Out-of-bounds regions replicate the nearest edge pixel.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    if image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    params = draw_transform(config, rng)
    matrix = inverse_transform_matrix(params, image.shape[1], image.shape[0])
    return kernels.affine_warp(image, matrix)


def load_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def variant_seed(master_seed: int, sample_id: str, variant: int) -> int:
    """Recordable per-variant seed; independent streams keep parallel
    augmentation order-insensitive."""
    return derive_seed(master_seed, text_key(sample_id), variant)


def augment_split(manifest: DatasetManifest, config: AugmentationConfig,
                  out_dir: str | Path) -> DatasetManifest:
    """Materialize the train split plus ``iterations * copies_per_image``
    augmented variants per image into ``out_dir``.

    Originals are byte-copied; variants are written as PNG. Validation and
    test samples pass through untouched (and keep their original paths).
    """
    train = manifest.split_samples("train")
    if not train:
        raise ValueError("manifest has no train split to augment")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise ValueError(f"output directory {out_dir} is not writable: {exc}") from exc

    label_names = {l.index: l.name for l in manifest.labels}
    new_samples: list[Sample] = []
    for sample in manifest.samples:
        if sample.split != "train":
            new_samples.append(sample)
            continue

        class_dir = out_dir / label_names[sample.label]
        class_dir.mkdir(exist_ok=True)
        src = Path(sample.path)
        copied = class_dir / src.name
        shutil.copyfile(src, copied)
        new_samples.append(Sample(sample.id, str(copied), sample.label, "train"))

        if config.variants_per_image == 0:
            continue
        image = load_rgb(src)
        for variant in range(config.variants_per_image):
            seed = variant_seed(config.seed, sample.id, variant)
            augmented = augment_image(image, config, np.random.default_rng(seed))
            out_path = class_dir / f"{src.stem}_aug{variant}.png"
            Image.fromarray(augmented).save(out_path, format="PNG")
            new_samples.append(Sample(
                id=f"{sample.id}#aug{variant}",
                path=str(out_path),
                label=sample.label,
                split="train",
                source_id=sample.id,
                draw_seed=seed,
            ))

    return DatasetManifest(list(manifest.labels), new_samples,
                           manifest.split_ratios, manifest.seed,
                           dict(manifest.provenance))
