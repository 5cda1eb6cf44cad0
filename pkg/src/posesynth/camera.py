"""Weak-perspective camera.

Normalized convention: ``(u, v) = (s*x + tx, s*y + ty)`` with the square
[-1, 1]^2 mapped onto the full image, ``px = (u+1)/2 * W`` and
``py = (v+1)/2 * H``. Backends that report cameras in a different
convention must translate into this one (see docs/api.md).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError

DEPTH_FLOOR = 0.1


@dataclass(frozen=True)
class WeakPerspectiveCamera:
    scale: float
    tx: float = 0.0
    ty: float = 0.0
    width: int = 512
    height: int = 512

    def __post_init__(self):
        if not (self.scale > 0):
            raise ValidationError(f"camera scale must be > 0, got {self.scale}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image size must be positive")

    def with_size(self, width, height):
        return WeakPerspectiveCamera(self.scale, self.tx, self.ty, width, height)

    def to_dict(self):
        return {
            "scale": float(self.scale),
            "tx": float(self.tx),
            "ty": float(self.ty),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["scale"], d.get("tx", 0.0), d.get("ty", 0.0),
                   int(d.get("width", 512)), int(d.get("height", 512)))


def project(cam, points):
    """Project (N,3) points in meters to (N,2) pixel coordinates.

    Depth-independent: only x and y enter the projection.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"points must be (N,3), got {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValidationError("non-finite points")
    u = cam.scale * pts[:, 0] + cam.tx
    v = cam.scale * pts[:, 1] + cam.ty
    px = (u + 1.0) / 2.0 * cam.width
    py = (v + 1.0) / 2.0 * cam.height
    return np.stack([px, py], axis=1)


def camera_depth(cam, points, depth_floor=DEPTH_FLOOR):
    """Per-point camera depth: z shifted so the nearest point sits at
    ``depth_floor`` (> 0, so depth 0 stays free as the background sentinel).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"points must be (N,3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValidationError("camera_depth of an empty point set")
    z = pts[:, 2]
    return z - z.min() + depth_floor
