"""Pose-prior VAE: difficulty gating and latent-space pose augmentation.

The checkpoint is a plain MLP encoder/decoder pair stored in the shared
array-container format. The encoder maps a pose-feature vector to a
concatenated (mu, log sigma) vector; the squared-norm of the embedding is
the pose-difficulty proxy, gated against a threshold tau (default 30).
"""

from dataclasses import dataclass

import numpy as np

from .body_model import PoseParams, rodrigues
from .container import load_container, save_container
from .errors import LoadError, ShapeError, ValidationError

DEFAULT_TAU = 30.0
LEAKY_SLOPE = 0.2

ACTIVATIONS = ("leaky_relu", "identity")


@dataclass(frozen=True)
class LatentDistribution:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=np.float64).reshape(-1)
        if mu.shape != sigma.shape:
            raise ShapeError("mu and sigma must have equal length")
        if not (sigma > 0).all():
            raise ValidationError("sigma must be positive elementwise")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class AugmentationConfig:
    """Latent perturbation ``z * (1 + scale * eps)``, eps ~ U(-range, range)."""

    scale: float = 0.1
    epsilon_range: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.scale < 0:
            raise ValidationError("augmentation scale must be >= 0")
        if self.epsilon_range < 0:
            raise ValidationError("epsilon_range must be >= 0")


@dataclass(frozen=True)
class PosePriorVAE:
    """MLP weights: each layer is (W, b, activation name)."""

    encoder_layers: tuple
    decoder_layers: tuple
    latent_dim: int
    pose_feature_encoding: str = "axis_angle"

    def __post_init__(self):
        if self.pose_feature_encoding not in ("axis_angle", "rot6d"):
            raise ValidationError(
                f"unknown pose_feature_encoding {self.pose_feature_encoding!r}"
            )
        for layers, tag in ((self.encoder_layers, "encoder"),
                            (self.decoder_layers, "decoder")):
            prev_out = None
            for i, (w, b, act) in enumerate(layers):
                if act not in ACTIVATIONS:
                    raise ValidationError(f"{tag} layer {i}: unknown activation {act!r}")
                if w.ndim != 2 or b.shape != (w.shape[0],):
                    raise ValidationError(f"{tag} layer {i}: weight/bias shape mismatch")
                if prev_out is not None and w.shape[1] != prev_out:
                    raise ValidationError(
                        f"{tag} layer {i}: input dim {w.shape[1]} != previous "
                        f"output dim {prev_out}"
                    )
                prev_out = w.shape[0]
        enc_out = self.encoder_layers[-1][0].shape[0]
        if enc_out != 2 * self.latent_dim:
            raise ValidationError(
                f"final encoder layer must output 2*latent_dim="
                f"{2 * self.latent_dim}, got {enc_out}"
            )
        if self.decoder_layers[0][0].shape[1] != self.latent_dim:
            raise ValidationError("decoder input dim must equal latent_dim")

    @property
    def input_dim(self):
        return self.encoder_layers[0][0].shape[1]

    @property
    def body_joint_count(self):
        per_joint = 3 if self.pose_feature_encoding == "axis_angle" else 6
        return self.input_dim // per_joint


def forward_mlp(layers, x):
    """Deterministic MLP forward pass."""
    h = np.asarray(x, dtype=np.float64).reshape(-1)
    for w, b, act in layers:
        if h.shape[0] != w.shape[1]:
            raise ShapeError(
                f"layer expects input dim {w.shape[1]}, got {h.shape[0]}"
            )
        h = w @ h + b
        if act == "leaky_relu":
            h = np.where(h >= 0, h, LEAKY_SLOPE * h)
    if not np.isfinite(h).all():
        raise ValidationError("non-finite MLP activation")
    return h


def pose_to_features(pose, encoding):
    if encoding == "axis_angle":
        return pose.body_pose.reshape(-1)
    feats = []
    for aa in pose.body_pose:
        r = rodrigues(aa)
        feats.extend([r[:, 0], r[:, 1]])
    return np.concatenate(feats) if feats else np.zeros(0)


def features_to_pose(feats, encoding, global_orient=None):
    feats = np.asarray(feats, dtype=np.float64).reshape(-1)
    go = np.zeros(3) if global_orient is None else global_orient
    if encoding == "axis_angle":
        return PoseParams(feats.reshape(-1, 3), go)
    if feats.shape[0] % 6:
        raise ShapeError("rot6d feature length must be a multiple of 6")
    rows = []
    for j in range(feats.shape[0] // 6):
        a1, a2 = feats[6 * j : 6 * j + 3], feats[6 * j + 3 : 6 * j + 6]
        rows.append(_rotation_to_axis_angle(_gram_schmidt(a1, a2)))
    return PoseParams(np.array(rows).reshape(-1, 3), go)


def _gram_schmidt(a1, a2):
    n1 = np.linalg.norm(a1)
    if n1 == 0:
        raise ValidationError("degenerate rot6d feature (zero first column)")
    b1 = a1 / n1
    a2p = a2 - (b1 @ a2) * b1
    n2 = np.linalg.norm(a2p)
    if n2 == 0:
        raise ValidationError("degenerate rot6d feature (collinear columns)")
    b2 = a2p / n2
    return np.stack([b1, b2, np.cross(b1, b2)], axis=1)


def _rotation_to_axis_angle(r):
    cos = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos)
    if angle < 1e-12:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # near 180 degrees: axis from the dominant column of R + I
        m = r + np.eye(3)
        axis = m[:, np.argmax(np.diag(m))]
        axis = axis / np.linalg.norm(axis)
        return axis * angle
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return axis / (2.0 * np.sin(angle)) * angle


def encode_features(vae, feats):
    out = forward_mlp(vae.encoder_layers, feats)
    ell = vae.latent_dim
    return LatentDistribution(out[:ell], np.exp(out[ell:]))


def encode(vae, pose):
    """Pose -> latent Gaussian (mu, sigma)."""
    feats = pose_to_features(pose, vae.pose_feature_encoding)
    if feats.shape[0] != vae.input_dim:
        raise ShapeError(
            f"pose features have dim {feats.shape[0]}, "
            f"checkpoint expects {vae.input_dim}"
        )
    return encode_features(vae, feats)


def decode(vae, z, global_orient=None):
    """Latent vector -> pose parameters (global orient is not modeled)."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape[0] != vae.latent_dim:
        raise ShapeError(f"latent dim {z.shape[0]} != {vae.latent_dim}")
    feats = forward_mlp(vae.decoder_layers, z)
    return features_to_pose(feats, vae.pose_feature_encoding, global_orient)


def difficulty_score(vae, pose, rng=None):
    """Embedding norm used by the difficulty gate.

    With ``rng=None`` (deterministic-mean mode) this is ||mu||; otherwise
    the embedding is sampled from N(mu, diag(sigma^2)) with the supplied
    generator.
    """
    dist = encode(vae, pose)
    if rng is None:
        e = dist.mu
    else:
        e = dist.mu + dist.sigma * rng.standard_normal(vae.latent_dim)
    return float(np.linalg.norm(e))


def is_hard_pose(score, tau=DEFAULT_TAU):
    """Strict threshold: a pose is hard iff its score exceeds tau."""
    return bool(score > tau)


def augment_pose(vae, pose, cfg, rng=None, deterministic_mean=False, eps=None):
    """Perturb the pose in latent space: ``decode(z * (1 + s*eps))``.

    ``eps`` overrides the sampled uniform perturbation (test hook). The
    input's global orientation is carried through unchanged.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    dist = encode(vae, pose)
    if deterministic_mean:
        z = dist.mu
    else:
        z = dist.mu + dist.sigma * rng.standard_normal(vae.latent_dim)
    if eps is None:
        eps = rng.uniform(-cfg.epsilon_range, cfg.epsilon_range, vae.latent_dim)
    else:
        eps = np.asarray(eps, dtype=np.float64).reshape(vae.latent_dim)
    z_aug = z * (1.0 + cfg.scale * eps)
    return decode(vae, z_aug, global_orient=pose.global_orient)


def _read_layers(arrays, prefix, activations):
    layers = []
    i = 0
    while f"{prefix}_W{i}" in arrays:
        w = arrays[f"{prefix}_W{i}"]
        b = arrays.get(f"{prefix}_b{i}")
        if b is None:
            raise LoadError(f"missing bias entry {prefix}_b{i}")
        layers.append((w, b, activations[i]))
        i += 1
    if not layers:
        raise LoadError(f"no {prefix}_W* entries in checkpoint")
    if len(activations) != len(layers):
        raise LoadError(
            f"{prefix}: manifest lists {len(activations)} activations "
            f"for {len(layers)} layers"
        )
    return tuple(layers)


def load_pose_prior(path):
    """Load and validate a pose-prior checkpoint container."""
    arrays, meta = load_container(path)
    try:
        latent_dim = int(meta["latent_dim"])
        acts = meta["activations"]
        encoding = meta.get("pose_feature_encoding", "axis_angle")
        vae = PosePriorVAE(
            encoder_layers=_read_layers(arrays, "enc", acts["encoder"]),
            decoder_layers=_read_layers(arrays, "dec", acts["decoder"]),
            latent_dim=latent_dim,
            pose_feature_encoding=encoding,
        )
    except KeyError as exc:
        raise LoadError(f"{path!r}: checkpoint manifest missing {exc}") from exc
    except ValidationError as exc:
        raise LoadError(f"{path!r}: {exc}") from exc
    return vae


def save_pose_prior(path, vae):
    arrays = {}
    acts = {"encoder": [], "decoder": []}
    for tag, layers in (("enc", vae.encoder_layers), ("dec", vae.decoder_layers)):
        key = "encoder" if tag == "enc" else "decoder"
        for i, (w, b, act) in enumerate(layers):
            arrays[f"{tag}_W{i}"] = w
            arrays[f"{tag}_b{i}"] = b
            acts[key].append(act)
    meta = {
        "kind": "pose_prior",
        "latent_dim": vae.latent_dim,
        "activations": acts,
        "pose_feature_encoding": vae.pose_feature_encoding,
    }
    return save_container(path, arrays, meta)
