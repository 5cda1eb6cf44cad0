"""posesynth: synthetic posed-human images with body-mesh ground truth.

Composes a parametric body model, a pose-prior difficulty gate, an
occlusion-aware depth renderer, and black-box generative/perception
backends into a dataset-generation pipeline, plus the evaluation metrics
and losses used to consume such datasets.
"""

__version__ = "0.1.0"

from .body_model import (BodyModelSpec, Joints3D, Mesh, PoseParams,
                         ShapeParams, forward, load_body_model,
                         regress_joints, save_body_model)
from .camera import WeakPerspectiveCamera, camera_depth, project
from .compose import MaskImage, apply_occlusion, filter_occluders, union_masks
from .depthmap import DepthMap, read_depth, write_depth, write_depth_png
from .errors import (AlignmentError, BackendError, LoadError, PoseSynthError,
                     ProtocolError, ShapeError, ValidationError)
from .losses import HmrPrediction, loss_2d, loss_3d, reproject, total_loss
from .metrics import (Keypoints2D, mpjpe, pa_mpjpe, pck, procrustes_align,
                      torso_threshold)
from .pose_prior import (AugmentationConfig, LatentDistribution, PosePriorVAE,
                         augment_pose, decode, difficulty_score, encode,
                         is_hard_pose, load_pose_prior, save_pose_prior)
from .raster import render_depth, normalize_for_conditioning

__all__ = [name for name in dir() if not name.startswith("_")]
