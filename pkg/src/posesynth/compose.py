"""Occlusion-aware composition of person depth with object masks.

The person depth map keeps a pixel only where no occluder mask covers it
and the pixel is foreground; occluded or background pixels become 0.
Occluders are composed regardless of relative depth (no person-vs-object
depth test), which is a documented faithfulness choice.
"""

from dataclasses import dataclass

import numpy as np

from .depthmap import DepthMap
from .errors import ShapeError, ValidationError

# Segmentation classes treated as the person itself, never as occluders.
DEFAULT_PERSON_CLASSES = frozenset({"person"})


@dataclass(frozen=True)
class MaskImage:
    """Boolean occluder raster with its originating class label."""

    data: np.ndarray
    class_label: str = ""

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {d.shape}")
        object.__setattr__(self, "data", d.astype(bool))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @classmethod
    def empty(cls, width, height, class_label=""):
        return cls(np.zeros((height, width), dtype=bool), class_label)


def filter_occluders(masks, person_classes=DEFAULT_PERSON_CLASSES):
    """Drop person-class masks; only non-human objects occlude."""
    return [m for m in masks if m.class_label not in person_classes]


def union_masks(masks, size=None):
    """Pixelwise OR of same-sized masks; empty list -> all-false.

    ``size`` = (W, H) is required for the empty-list case and checked
    against the masks otherwise.
    """
    if not masks:
        if size is None:
            raise ValidationError("union of zero masks needs an explicit size")
        return MaskImage.empty(size[0], size[1], "union")
    shape = masks[0].data.shape
    if size is not None and shape != (size[1], size[0]):
        raise ShapeError(f"mask shape {shape} != requested size {size}")
    acc = np.zeros(shape, dtype=bool)
    for m in masks:
        if m.data.shape != shape:
            raise ShapeError(f"mask size mismatch: {m.data.shape} vs {shape}")
        acc |= m.data
    return MaskImage(acc, "union")


def apply_occlusion(depth, mask):
    """Zero out person depth wherever the occluder mask is set.

    ``d*[p] = d[p] if (not m[p]) and d[p] > 0 else 0`` -- Hadamard product
    with the indicator of (clear of occluders AND inside the silhouette).
    """
    if mask.data.shape != depth.data.shape:
        raise ShapeError(
            f"mask {mask.data.shape} does not match depth {depth.data.shape}"
        )
    keep = (~mask.data) & (depth.data > 0)
    return DepthMap(np.where(keep, depth.data, 0.0))
