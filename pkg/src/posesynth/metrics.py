"""Human-mesh-recovery evaluation metrics: MPJPE, PA-MPJPE, PCK."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ShapeError, ValidationError

MM_PER_M = 1000.0


@dataclass(frozen=True)
class Keypoints2D:
    """2-D keypoints in pixels with per-joint visibility."""

    points: np.ndarray
    visibility: np.ndarray = field(default=None)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ShapeError(f"points must be (k,2), got {p.shape}")
        vis = self.visibility
        vis = np.ones(p.shape[0], dtype=bool) if vis is None else np.asarray(vis, bool)
        if vis.shape != (p.shape[0],):
            raise ShapeError("visibility must have one flag per joint")
        if not np.isfinite(p[vis]).all():
            raise ValidationError("non-finite visible keypoints")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "visibility", vis)


def _paired(pred, gt):
    a, b = pred.joints, gt.joints
    if a.shape != b.shape:
        raise ShapeError(f"joint count mismatch: {a.shape} vs {b.shape}")
    return a, b


def mpjpe(pred, gt, root_align=True):
    """Mean per-joint position error in millimeters.

    Inputs are meters. ``root_align`` (default on, standard benchmark
    practice) translates both sets so joint 0 coincides before measuring.
    """
    a, b = _paired(pred, gt)
    if root_align:
        a = a - a[0]
        b = b - b[0]
    return float(np.linalg.norm(a - b, axis=1).mean() * MM_PER_M)


def procrustes_align(pred, gt):
    """Least-squares similarity transform from pred onto gt.

    Returns (R, scale, t) minimizing ``sum ||s R p_i + t - g_i||^2``. The
    rotation is proper (det +1), enforced by flipping the sign of the
    smallest singular vector when needed.
    """
    p, g = _paired(pred, gt)
    n = p.shape[0]
    if n < 3:
        raise AlignmentError("need at least 3 joints to align")
    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    x = p - mu_p
    y = g - mu_g
    var_p = (x ** 2).sum()
    if var_p == 0 or np.linalg.matrix_rank(x, tol=1e-12 * max(1.0, np.abs(x).max())) < 2:
        raise AlignmentError("pred joints are degenerate (rank < 2)")
    k = y.T @ x
    u, s, vt = np.linalg.svd(k)
    d = np.ones(3)
    d[2] = np.sign(np.linalg.det(u @ vt))
    r = u @ np.diag(d) @ vt
    scale = float((s * d).sum() / var_p)
    t = mu_g - scale * r @ mu_p
    return r, scale, t


def apply_similarity(transform, points):
    r, s, t = transform
    return s * points @ r.T + t


def pa_mpjpe(pred, gt):
    """MPJPE after Procrustes alignment of pred onto gt (mm)."""
    from .body_model import Joints3D

    transform = procrustes_align(pred, gt)
    aligned = Joints3D(apply_similarity(transform, pred.joints))
    return mpjpe(aligned, gt, root_align=False)


def pck(pred, gt, threshold_px):
    """Fraction of visible gt keypoints within ``threshold_px`` (inclusive)."""
    if pred.points.shape != gt.points.shape:
        raise ShapeError("keypoint count mismatch")
    vis = gt.visibility
    if not vis.any():
        raise ValidationError("pck needs at least one visible gt joint")
    dist = np.linalg.norm(pred.points[vis] - gt.points[vis], axis=1)
    return float((dist <= threshold_px).mean())


def torso_threshold(points, torso_indices, fraction=0.5):
    """Per-sample PCK threshold: fraction of the mean shoulder-hip span."""
    idx = np.asarray(torso_indices, dtype=int)
    if idx.shape != (4,):
        raise ShapeError("torso_indices must be (l_shoulder, r_shoulder, l_hip, r_hip)")
    ls, rs, lh, rh = points[idx]
    torso = (np.linalg.norm(ls - lh) + np.linalg.norm(rs - rh)) / 2.0
    return float(fraction * torso)


def write_report(path, records, summary):
    """JSON-lines evaluation report: one record per sample + a summary row."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        fh.write(json.dumps({"summary": summary}, sort_keys=True) + "\n")
    return path
