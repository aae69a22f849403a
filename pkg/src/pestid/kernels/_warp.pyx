# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bilinear affine warp kernel.

Mirrors ``warp_py.warp_f64`` operation by operation; compiled with
-ffp-contract=off so results are bit-identical to the NumPy fallback.
"""

import numpy as np

from libc.math cimport floor

DEF COORD_LIMIT = 1e9


def warp_f64(double[:, :, ::1] img, double[::1] m, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t nc = img.shape[2]
    out_arr = np.empty((out_h, out_w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t x, y, c, x0, y0, x0c, x1c, y0c, y1c
    cdef double sx, sy, fx, fy, f, top, bot

    with nogil:
        for y in range(out_h):
            for x in range(out_w):
                sx = (m[0] * x + m[1] * y) + m[2]
                sy = (m[3] * x + m[4] * y) + m[5]
                if sx < -COORD_LIMIT:
                    sx = -COORD_LIMIT
                elif sx > COORD_LIMIT:
                    sx = COORD_LIMIT
                if sy < -COORD_LIMIT:
                    sy = -COORD_LIMIT
                elif sy > COORD_LIMIT:
                    sy = COORD_LIMIT

                f = floor(sx)
                x0 = <Py_ssize_t> f
                fx = sx - f
                f = floor(sy)
                y0 = <Py_ssize_t> f
                fy = sy - f

                x0c = 0 if x0 < 0 else (w - 1 if x0 > w - 1 else x0)
                x1c = 0 if x0 + 1 < 0 else (w - 1 if x0 + 1 > w - 1 else x0 + 1)
                y0c = 0 if y0 < 0 else (h - 1 if y0 > h - 1 else y0)
                y1c = 0 if y0 + 1 < 0 else (h - 1 if y0 + 1 > h - 1 else y0 + 1)

                for c in range(nc):
                    top = (1.0 - fx) * img[y0c, x0c, c] + fx * img[y0c, x1c, c]
                    bot = (1.0 - fx) * img[y1c, x0c, c] + fx * img[y1c, x1c, c]
                    out[y, x, c] = (1.0 - fy) * top + fy * bot
    return out_arr
