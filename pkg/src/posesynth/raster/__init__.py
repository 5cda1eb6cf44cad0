"""Software depth rasterizer with z-buffering.

The triangle-fill inner loop dominates runtime, so it lives in a compiled
Cython kernel with a pure-numpy fallback selected at import time. Both
kernels produce bit-identical buffers; set ``POSESYNTH_PURE_RASTER=1`` to
force the fallback. ``benchmarks/bench_raster.py`` compares the two.
"""

import logging
import os

import numpy as np

from ..camera import DEPTH_FLOOR, camera_depth, project
from ..depthmap import DepthMap
from ..errors import ValidationError
from . import _kernel_py

log = logging.getLogger(__name__)

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

if os.environ.get("POSESYNTH_PURE_RASTER"):
    _active = _kernel_py
elif _compiled is not None:
    _active = _compiled
else:
    log.info("compiled raster kernel unavailable; using pure-python fallback")
    _active = _kernel_py

KERNEL_KIND = _active.KIND
HAVE_COMPILED_KERNEL = _compiled is not None


def available_kernels():
    """Name -> fill function, for tests and benchmarks."""
    kernels = {"python": _kernel_py.fill_depth}
    if _compiled is not None:
        kernels["compiled"] = _compiled.fill_depth
    return kernels


def render_depth(mesh, cam, size=(64, 64), depth_floor=DEPTH_FLOOR, kernel=None):
    """Render the mesh's camera-depth map at ``size`` = (W, H).

    The camera's normalized coordinates are mapped onto the requested
    raster grid (its own image_size is ignored here). Pixels covered by no
    triangle hold the background sentinel 0; covered pixels hold the
    nearest interpolated camera depth, which is >= depth_floor > 0.
    """
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0:
        raise ValidationError(f"raster size must be positive, got {size}")
    buf = np.full((h, w), np.inf)
    if mesh.vertices.shape[0] and mesh.faces.shape[0]:
        grid_cam = cam.with_size(w, h)
        pts = project(grid_cam, mesh.vertices)
        zs = camera_depth(grid_cam, mesh.vertices, depth_floor)
        fill = _active.fill_depth if kernel is None else kernel
        fill(
            np.ascontiguousarray(pts[:, 0]),
            np.ascontiguousarray(pts[:, 1]),
            np.ascontiguousarray(zs),
            np.ascontiguousarray(mesh.faces, dtype=np.int64),
            w,
            h,
            buf,
        )
    return DepthMap(np.where(np.isinf(buf), 0.0, buf))


NORMALIZED_NEAR = 1.0
NORMALIZED_FAR = 0.05


def normalize_for_conditioning(depth):
    """Map foreground depth linearly onto [0.05, 1.0], nearest -> 1.0.

    Depth-to-image backends expect relative near-is-bright conditioning.
    Background stays 0. Returns ``(normalized, all_background)``; an
    all-background map comes back unchanged with the flag set.
    """
    fg = depth.foreground()
    if not fg.any():
        log.warning("normalize_for_conditioning: depth map has no foreground")
        return depth, True
    d = depth.data
    d_min = d[fg].min()
    d_max = d[fg].max()
    out = np.zeros_like(d)
    if d_max == d_min:
        out[fg] = NORMALIZED_NEAR
    else:
        scale = (NORMALIZED_FAR - NORMALIZED_NEAR) / (d_max - d_min)
        out[fg] = NORMALIZED_NEAR + (d[fg] - d_min) * scale
    return DepthMap(out), False
