# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled triangle-fill kernel.

Must stay bit-identical to ``_kernel_py.fill_depth``: same edge-function
expressions, same winding canonicalization, same top-left rule, same
interpolation. Compiled with -ffp-contract=off so no FMA creeps in.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()

KIND = "compiled"


cdef inline bint _is_top_left(double px, double py, double qx, double qy) nogil:
    cdef double dx = qx - px
    cdef double dy = qy - py
    return dy < 0.0 or (dy == 0.0 and dx > 0.0)


cdef inline double _min3(double a, double b, double c) nogil:
    cdef double m = a
    if b < m:
        m = b
    if c < m:
        m = c
    return m


cdef inline double _max3(double a, double b, double c) nogil:
    cdef double m = a
    if b > m:
        m = b
    if c > m:
        m = c
    return m


def fill_depth(double[::1] xs, double[::1] ys, double[::1] depth,
               long long[:, ::1] faces, int width, int height,
               double[:, ::1] buf):
    """Rasterize triangles into ``buf`` (H,W), keeping the minimum depth.

    ``buf`` must be pre-filled with +inf; uncovered pixels are left as-is.
    """
    cdef Py_ssize_t f, ix, iy
    cdef long long i0, i1, i2
    cdef double ax, ay, da, bx, by, db, cx, cy, dc
    cdef double tx, ty, td
    cdef double area2, w0, w1, w2, z, px, py
    cdef double fx_lo, fx_hi, fy_lo, fy_hi
    cdef long x_lo, x_hi, y_lo, y_hi
    cdef bint tl0, tl1, tl2

    with nogil:
        for f in range(faces.shape[0]):
            i0 = faces[f, 0]
            i1 = faces[f, 1]
            i2 = faces[f, 2]
            ax = xs[i0]; ay = ys[i0]; da = depth[i0]
            bx = xs[i1]; by = ys[i1]; db = depth[i1]
            cx = xs[i2]; cy = ys[i2]; dc = depth[i2]

            area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area2 == 0.0:
                continue
            if area2 < 0.0:
                tx = bx; ty = by; td = db
                bx = cx; by = cy; db = dc
                cx = tx; cy = ty; dc = td
                area2 = -area2

            # clamp in double space first: the cast of an enormous
            # coordinate to long would be undefined
            fx_lo = floor(_min3(ax, bx, cx) - 1.0)
            fx_hi = ceil(_max3(ax, bx, cx) + 1.0)
            fy_lo = floor(_min3(ay, by, cy) - 1.0)
            fy_hi = ceil(_max3(ay, by, cy) + 1.0)
            if fx_lo > width - 1 or fx_hi < 0 or fy_lo > height - 1 or fy_hi < 0:
                continue
            x_lo = <long>fx_lo if fx_lo > 0 else 0
            x_hi = <long>fx_hi if fx_hi < width - 1 else width - 1
            y_lo = <long>fy_lo if fy_lo > 0 else 0
            y_hi = <long>fy_hi if fy_hi < height - 1 else height - 1

            tl0 = _is_top_left(bx, by, cx, cy)
            tl1 = _is_top_left(cx, cy, ax, ay)
            tl2 = _is_top_left(ax, ay, bx, by)

            for iy in range(y_lo, y_hi + 1):
                py = iy + 0.5
                for ix in range(x_lo, x_hi + 1):
                    px = ix + 0.5
                    w0 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
                    if not (w0 > 0.0 or (w0 == 0.0 and tl0)):
                        continue
                    w1 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
                    if not (w1 > 0.0 or (w1 == 0.0 and tl1)):
                        continue
                    w2 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                    if not (w2 > 0.0 or (w2 == 0.0 and tl2)):
                        continue
                    z = (w0 * da + w1 * db + w2 * dc) / area2
                    if z < buf[iy, ix]:
                        buf[iy, ix] = z
