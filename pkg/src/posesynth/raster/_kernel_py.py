"""Pure-numpy triangle-fill kernel (fallback for the compiled extension).

Coverage rule: a pixel is covered iff its center (ix+0.5, iy+0.5) has
nonnegative edge functions for all three edges of the positively wound
triangle, with zero allowed only on top-left edges. Depth is barycentric,
divided by twice the signed area. The arithmetic mirrors the compiled
kernel expression-for-expression so both produce bit-identical buffers.
"""

import numpy as np

KIND = "python"


def _is_top_left(px, py, qx, qy):
    dx = qx - px
    dy = qy - py
    return dy < 0.0 or (dy == 0.0 and dx > 0.0)


def fill_depth(xs, ys, depth, faces, width, height, buf):
    """Rasterize triangles into ``buf`` (H,W), keeping the minimum depth.

    ``buf`` must be pre-filled with +inf; uncovered pixels are left as-is.
    """
    for f in range(faces.shape[0]):
        i0, i1, i2 = faces[f, 0], faces[f, 1], faces[f, 2]
        ax, ay, da = xs[i0], ys[i0], depth[i0]
        bx, by, db = xs[i1], ys[i1], depth[i1]
        cx, cy, dc = xs[i2], ys[i2], depth[i2]

        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            bx, by, db, cx, cy, dc = cx, cy, dc, bx, by, db
            area2 = -area2

        x_lo = max(0, int(np.floor(min(ax, bx, cx) - 1.0)))
        x_hi = min(width - 1, int(np.ceil(max(ax, bx, cx) + 1.0)))
        y_lo = max(0, int(np.floor(min(ay, by, cy) - 1.0)))
        y_hi = min(height - 1, int(np.ceil(max(ay, by, cy) + 1.0)))
        if x_lo > x_hi or y_lo > y_hi:
            continue

        px = np.arange(x_lo, x_hi + 1, dtype=np.float64) + 0.5
        py = (np.arange(y_lo, y_hi + 1, dtype=np.float64) + 0.5)[:, None]

        w0 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
        w1 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
        w2 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)

        tl0 = _is_top_left(bx, by, cx, cy)
        tl1 = _is_top_left(cx, cy, ax, ay)
        tl2 = _is_top_left(ax, ay, bx, by)

        covered = (
            ((w0 > 0.0) | ((w0 == 0.0) & tl0))
            & ((w1 > 0.0) | ((w1 == 0.0) & tl1))
            & ((w2 > 0.0) | ((w2 == 0.0) & tl2))
        )
        if not covered.any():
            continue
        z = (w0 * da + w1 * db + w2 * dc) / area2
        window = buf[y_lo : y_hi + 1, x_lo : x_hi + 1]
        np.minimum(window, np.where(covered, z, np.inf), out=window)
