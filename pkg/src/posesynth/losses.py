"""Supervision losses for adapting HMR models.

2-D reprojection loss against real-image keypoints and a 3-D parameter
loss against synthetic ground truth; the training objective is their sum.
This module only computes loss values -- the gradient-descent loop over a
deep network lives downstream.
"""

from dataclasses import dataclass

import numpy as np

from .body_model import forward, regress_joints
from .camera import WeakPerspectiveCamera, project
from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class HmrPrediction:
    """One model output: pose, shape, and weak-perspective camera."""

    theta: "PoseParams"
    beta: "ShapeParams"
    camera: WeakPerspectiveCamera
    confidence: float = 1.0


def reproject(pred, spec):
    """Predicted 2-D joints: project(regress(forward(theta, beta)))."""
    mesh = forward(spec, pred.theta, pred.beta)
    joints = regress_joints(spec, mesh)
    return project(pred.camera, joints.joints)


def loss_2d(pred, gt_kp, spec, reduction="frobenius"):
    """Reprojection error against visible ground-truth keypoints.

    Default is the Frobenius norm over the visible-joint residual matrix;
    ``reduction="mean"`` averages per-joint distances instead.
    """
    jhat = reproject(pred, spec)
    if jhat.shape[0] != gt_kp.points.shape[0]:
        raise ShapeError(
            f"regressor produces {jhat.shape[0]} joints, "
            f"ground truth has {gt_kp.points.shape[0]}"
        )
    vis = gt_kp.visibility
    if not vis.any():
        raise ValidationError("loss_2d needs at least one visible joint")
    resid = jhat[vis] - gt_kp.points[vis]
    if reduction == "frobenius":
        return float(np.sqrt((resid ** 2).sum()))
    if reduction == "mean":
        return float(np.linalg.norm(resid, axis=1).mean())
    raise ValidationError(f"unknown reduction {reduction!r}")


def loss_3d(pred, gt_theta, gt_beta, include_global_orient=False):
    """Parameter-space loss ``||beta_hat - beta|| + ||theta_hat - theta||``.

    The pose residual is taken directly in axis-angle coordinates. By
    default only the body pose enters (the global orientation is a
    separate parameter); set ``include_global_orient`` to add it.
    """
    db = pred.beta.betas - gt_beta.betas
    dt = (pred.theta.body_pose - gt_theta.body_pose).reshape(-1)
    if include_global_orient:
        dt = np.concatenate([pred.theta.global_orient - gt_theta.global_orient, dt])
    return float(np.linalg.norm(db) + np.linalg.norm(dt))


def total_loss(l2d, l3d, w2d=1.0, w3d=1.0):
    """Combined objective; default weights are 1 (none are specified)."""
    return w2d * l2d + w3d * l3d
