"""Depth-map container plus its binary and PNG file formats.

Binary format: 8-byte header (u32 width, u32 height, little-endian)
followed by height*width float32 values, row-major. PNG export is 16-bit
grayscale with ``value = round(d * 65535 / d_max)``.
"""

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import LoadError, ShapeError, ValidationError

BACKGROUND = 0.0


@dataclass(frozen=True)
class DepthMap:
    """(H,W) nonnegative depth raster; 0 marks background."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ShapeError(f"depth data must be 2-D, got shape {d.shape}")
        if not np.isfinite(d).all():
            raise ValidationError("non-finite depth values")
        if (d < 0).any():
            raise ValidationError("negative depth values")
        object.__setattr__(self, "data", d)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def foreground(self):
        """Boolean silhouette {d > 0}."""
        return self.data > 0

    def to_float32(self):
        return self.data.astype("<f4")


def write_depth(path, depth):
    """Write the binary .bin format; returns the bytes written."""
    payload = struct.pack("<II", depth.width, depth.height) + depth.to_float32().tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)
    return payload


def read_depth(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise LoadError(f"{path!r}: truncated depth file")
    w, h = struct.unpack("<II", raw[:8])
    body = raw[8:]
    if len(body) != 4 * w * h:
        raise LoadError(
            f"{path!r}: expected {4 * w * h} payload bytes for {w}x{h}, "
            f"got {len(body)}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape(h, w)
    return DepthMap(data.astype(np.float64))


def write_depth_png(path, depth):
    """Lossless 16-bit PNG for visual inspection."""
    d = depth.data
    d_max = d.max()
    if d_max > 0:
        scaled = np.rint(d * (65535.0 / d_max)).astype(np.uint16)
    else:
        scaled = np.zeros_like(d, dtype=np.uint16)
    Image.fromarray(scaled).save(path, format="PNG")
