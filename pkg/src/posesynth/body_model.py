"""SMPL-style parametric body model.

Shape and pose blend shapes, forward kinematics over an axis-angle joint
tree, linear blend skinning, and linear joint regression. All operations
are pure functions over immutable inputs.
"""

from dataclasses import dataclass, field

import numpy as np

from .container import load_container, save_container
from .errors import LoadError, ShapeError, ValidationError

WEIGHT_ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh: ``vertices`` (V,3) meters, ``faces`` (F,3) indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ShapeError(f"vertices must be (V,3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ShapeError(f"faces must be (F,3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValidationError("face index out of range")
        if f.size:
            degenerate = (f[:, 0] == f[:, 1]) & (f[:, 1] == f[:, 2])
            if degenerate.any():
                raise ValidationError(
                    f"{int(degenerate.sum())} faces have three identical indices"
                )
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)


@dataclass(frozen=True)
class Joints3D:
    """Joint positions (K,3) in meters."""

    joints: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.joints, dtype=np.float64)
        if j.ndim != 2 or j.shape[1] != 3:
            raise ShapeError(f"joints must be (K,3), got {j.shape}")
        if not np.isfinite(j).all():
            raise ValidationError("non-finite joint coordinates")
        object.__setattr__(self, "joints", j)


@dataclass(frozen=True)
class PoseParams:
    """Axis-angle pose: ``body_pose`` (K-1,3) plus a 3-vector global orient."""

    body_pose: np.ndarray
    global_orient: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        bp = np.asarray(self.body_pose, dtype=np.float64).reshape(-1, 3)
        go = np.asarray(self.global_orient, dtype=np.float64).reshape(3)
        if not (np.isfinite(bp).all() and np.isfinite(go).all()):
            raise ValidationError("non-finite pose parameters")
        object.__setattr__(self, "body_pose", bp)
        object.__setattr__(self, "global_orient", go)

    @classmethod
    def zeros(cls, joint_count):
        return cls(np.zeros((joint_count - 1, 3)), np.zeros(3))


@dataclass(frozen=True)
class ShapeParams:
    """Shape coefficients (length B, dimensionless)."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64).reshape(-1)
        if not np.isfinite(b).all():
            raise ValidationError("non-finite shape parameters")
        object.__setattr__(self, "betas", b)

    @classmethod
    def zeros(cls, basis_size):
        return cls(np.zeros(basis_size))


@dataclass(frozen=True)
class BodyModelSpec:
    """All learned/fixed tensors of one body model.

    Attributes:
        template_vertices: (V,3) rest vertices, meters.
        shape_dirs: (V,3,B) shape blend shapes.
        pose_dirs: (V,3,P) pose-corrective blend shapes, P = 9*(K-1) or 0.
        joint_regressor: (K,V) nonnegative linear regressor.
        skinning_weights: (V,K), rows sum to 1.
        parent: (K,) kinematic tree, parent[0] == -1, parent[i] < i.
        faces: (F,3) triangle indices.
    """

    template_vertices: np.ndarray
    shape_dirs: np.ndarray
    pose_dirs: np.ndarray
    joint_regressor: np.ndarray
    skinning_weights: np.ndarray
    parent: np.ndarray
    faces: np.ndarray

    @property
    def vertex_count(self):
        return self.template_vertices.shape[0]

    @property
    def joint_count(self):
        return self.parent.shape[0]

    @property
    def shape_basis_size(self):
        return self.shape_dirs.shape[2]

    @property
    def pose_basis_size(self):
        return self.pose_dirs.shape[2]

    def validate(self):
        """Check every structural invariant; raises ValidationError."""
        v, k = self.vertex_count, self.joint_count
        if self.template_vertices.shape != (v, 3):
            raise ValidationError("template_vertices must be (V,3)")
        if self.shape_dirs.shape[:2] != (v, 3):
            raise ValidationError("shape_dirs must be (V,3,B)")
        if self.pose_dirs.shape[:2] != (v, 3):
            raise ValidationError("pose_dirs must be (V,3,P)")
        p = self.pose_basis_size
        if p not in (0, 9 * (k - 1)):
            raise ValidationError(
                f"pose_dirs basis must be 0 or 9*(K-1)={9 * (k - 1)}, got {p}"
            )
        if self.joint_regressor.shape != (k, v):
            raise ValidationError(
                f"joint_regressor must be (K,V)=({k},{v}), "
                f"got {self.joint_regressor.shape}"
            )
        if (self.joint_regressor < 0).any():
            raise ValidationError("joint_regressor has negative entries")
        if self.skinning_weights.shape != (v, k):
            raise ValidationError("skinning_weights must be (V,K)")
        if (self.skinning_weights < 0).any():
            raise ValidationError("skinning_weights has negative entries")
        row_sums = self.skinning_weights.sum(axis=1)
        worst = np.abs(row_sums - 1.0).max() if v else 0.0
        if worst > WEIGHT_ROW_SUM_TOL:
            raise ValidationError(
                f"skinning weight rows must sum to 1 (worst deviation {worst:.3g})"
            )
        if self.parent.shape != (k,):
            raise ValidationError("parent must be length K")
        if self.parent[0] != -1:
            raise ValidationError("parent[0] must be the root sentinel -1")
        for j in range(1, k):
            if not 0 <= self.parent[j] < j:
                raise ValidationError(
                    f"parent[{j}]={self.parent[j]} breaks the tree ordering "
                    "(parent index must be < child index)"
                )
        # face checks reuse the Mesh constructor
        Mesh(self.template_vertices, self.faces)
        return self


def rodrigues(axis_angle):
    """Axis-angle (3,) to rotation matrix (3,3).

    Zero vector returns the identity exactly so that a rest pose has
    bit-exact identity transforms.
    """
    aa = np.asarray(axis_angle, dtype=np.float64).reshape(3)
    angle = np.linalg.norm(aa)
    if angle == 0.0:
        return np.eye(3)
    axis = aa / angle
    x, y, z = axis
    skew = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * skew + (1.0 - np.cos(angle)) * (skew @ skew)


def _joint_rotations(spec, pose):
    if pose.body_pose.shape[0] != spec.joint_count - 1:
        raise ShapeError(
            f"body_pose has {pose.body_pose.shape[0]} joints, "
            f"model expects {spec.joint_count - 1}"
        )
    rots = np.empty((spec.joint_count, 3, 3))
    rots[0] = rodrigues(pose.global_orient)
    for j in range(1, spec.joint_count):
        rots[j] = rodrigues(pose.body_pose[j - 1])
    return rots


def forward(spec, pose, shape):
    """Pose and shape the model; returns the skinned Mesh.

    The skinning step is evaluated in displacement form,
    ``v + sum_k w_k * ((G_k - I) (v - J_k) + d_k)``, which is algebraically
    the standard blend when weight rows sum to 1 and returns the template
    bit-exactly at the rest pose.
    """
    if shape.betas.shape[0] != spec.shape_basis_size:
        raise ShapeError(
            f"betas has length {shape.betas.shape[0]}, "
            f"model expects {spec.shape_basis_size}"
        )
    k = spec.joint_count
    v_shaped = spec.template_vertices + spec.shape_dirs @ shape.betas
    rest_joints = spec.joint_regressor @ v_shaped

    rots = _joint_rotations(spec, pose)
    if spec.pose_basis_size:
        feat = (rots[1:] - np.eye(3)).reshape(-1)
        v_posed = v_shaped + spec.pose_dirs @ feat
    else:
        v_posed = v_shaped

    # Forward kinematics: global rotations and posed-joint displacements.
    global_rot = np.empty_like(rots)
    disp = np.zeros((k, 3))
    global_rot[0] = rots[0]
    for j in range(1, k):
        par = spec.parent[j]
        global_rot[j] = global_rot[par] @ rots[j]
        bone = rest_joints[j] - rest_joints[par]
        disp[j] = disp[par] + (global_rot[par] - np.eye(3)) @ bone

    offsets = np.zeros_like(v_posed)
    for j in range(k):
        w = spec.skinning_weights[:, j]
        if not w.any():
            continue
        moved = (v_posed - rest_joints[j]) @ (global_rot[j] - np.eye(3)).T + disp[j]
        offsets += w[:, None] * moved
    return Mesh(v_posed + offsets, spec.faces)


def regress_joints(spec, mesh):
    """Linear joint regression ``X = W @ vertices``."""
    if mesh.vertices.shape[0] != spec.vertex_count:
        raise ShapeError(
            f"mesh has {mesh.vertices.shape[0]} vertices, "
            f"model expects {spec.vertex_count}"
        )
    return Joints3D(spec.joint_regressor @ mesh.vertices)


_ENTRIES = ("v_template", "shapedirs", "posedirs", "J_regressor",
            "weights", "kintree", "faces")


def load_body_model(path):
    """Load and validate a body-model container file."""
    arrays, _ = load_container(path)
    missing = [name for name in _ENTRIES if name not in arrays]
    if missing:
        raise LoadError(f"{path!r}: missing body-model entries {missing}")
    spec = BodyModelSpec(
        template_vertices=arrays["v_template"],
        shape_dirs=arrays["shapedirs"],
        pose_dirs=arrays["posedirs"],
        joint_regressor=arrays["J_regressor"],
        skinning_weights=arrays["weights"],
        parent=arrays["kintree"].astype(np.int64),
        faces=arrays["faces"].astype(np.int64),
    )
    try:
        spec.validate()
    except ValidationError as exc:
        raise LoadError(f"{path!r}: {exc}") from exc
    return spec


def save_body_model(path, spec):
    """Write a BodyModelSpec to the container format."""
    spec.validate()
    arrays = {
        "v_template": spec.template_vertices,
        "shapedirs": spec.shape_dirs,
        "posedirs": spec.pose_dirs,
        "J_regressor": spec.joint_regressor,
        "weights": spec.skinning_weights,
        "kintree": spec.parent.astype(np.int64),
        "faces": spec.faces.astype(np.int64),
    }
    meta = {
        "kind": "body_model",
        "V": spec.vertex_count,
        "K": spec.joint_count,
        "B": spec.shape_basis_size,
        "P": spec.pose_basis_size,
    }
    return save_container(path, arrays, meta)
