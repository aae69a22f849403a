"""Image resampling kernels with a compiled fast path.

The Cython extension is used when available; otherwise the NumPy fallback
takes over. Set ``PESTID_PURE_PYTHON=1`` to force the fallback. Both
backends produce bit-identical output, so the choice never changes
results, only speed (see benchmarks/bench_warp.py).
"""

from __future__ import annotations

import os

import numpy as np

from . import warp_py

if os.environ.get("PESTID_PURE_PYTHON"):
    _impl = warp_py
else:
    try:
        from . import _warp as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = warp_py

BACKEND = "python" if _impl is warp_py else "compiled"


def backends() -> dict[str, object]:
    """All importable backends, keyed by name (used by the benchmark)."""
    found: dict[str, object] = {"python": warp_py}
    try:
        from . import _warp

        found["compiled"] = _warp
    except ImportError:
        pass
    return found


def _warp_any(image: np.ndarray, matrix: np.ndarray, out_h: int, out_w: int,
              impl=None) -> np.ndarray:
    impl = _impl if impl is None else impl
    if image.ndim != 3:
        raise ValueError(f"expected an (H, W, C) array, got shape {image.shape}")
    if image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    m = np.ascontiguousarray(matrix, dtype=np.float64).reshape(6)
    src = np.ascontiguousarray(image, dtype=np.float64)
    out = impl.warp_f64(src, m, out_h, out_w)
    if image.dtype == np.uint8:
        return np.rint(out).astype(np.uint8)
    if image.dtype == np.float32:
        return out.astype(np.float32)
    return out


def affine_warp(image: np.ndarray, inverse_matrix: np.ndarray, *, impl=None) -> np.ndarray:
    """Warp ``image`` through a 2x3 inverse affine map (dst pixel -> src point).

    Output has the input's height, width, and dtype. Bilinear sampling;
    out-of-bounds samples replicate the nearest edge pixel.
    """
    return _warp_any(image, inverse_matrix, image.shape[0], image.shape[1], impl=impl)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int, *, impl=None) -> np.ndarray:
    """Bilinear resize using the half-pixel-center convention."""
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    sy = image.shape[0] / out_h
    sx = image.shape[1] / out_w
    matrix = np.array([sx, 0.0, 0.5 * sx - 0.5, 0.0, sy, 0.5 * sy - 0.5])
    return _warp_any(image, matrix, out_h, out_w, impl=impl)
