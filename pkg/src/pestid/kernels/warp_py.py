"""NumPy fallback for the bilinear affine warp kernel.

The compiled kernel in ``_warp.pyx`` mirrors this implementation operation
by operation (same association order, float64 arithmetic), so the two
backends return bit-identical arrays. Any change here must be made there
too, in the same order.
"""

from __future__ import annotations

import numpy as np

# Source coordinates are clamped to this range before flooring so the
# int64 cast can never overflow; it is far outside any real image.
COORD_LIMIT = 1e9


def warp_f64(img: np.ndarray, m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample ``img`` (H, W, C) float64 through the inverse affine map ``m``.

    ``m`` holds (m00, m01, m02, m10, m11, m12); destination pixel (x, y)
    samples source point (m00*x + m01*y + m02, m10*x + m11*y + m12) with
    bilinear interpolation. Samples outside the source replicate the
    nearest edge pixel.
    """
    h, w = img.shape[0], img.shape[1]
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    sx = (m[0] * xs[None, :] + m[1] * ys[:, None]) + m[2]
    sy = (m[3] * xs[None, :] + m[4] * ys[:, None]) + m[5]
    sx = np.clip(sx, -COORD_LIMIT, COORD_LIMIT)
    sy = np.clip(sy, -COORD_LIMIT, COORD_LIMIT)

    x0f = np.floor(sx)
    y0f = np.floor(sy)
    fx = (sx - x0f)[..., None]
    fy = (sy - y0f)[..., None]
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)

    g00 = img[y0c, x0c]
    g01 = img[y0c, x1c]
    g10 = img[y1c, x0c]
    g11 = img[y1c, x1c]

    top = (1.0 - fx) * g00 + fx * g01
    bot = (1.0 - fx) * g10 + fx * g11
    return (1.0 - fy) * top + fy * bot
