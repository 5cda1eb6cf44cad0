"""Deterministic toy assets: a small body model, a pose-prior checkpoint,
and a fixture photo.

Real SMPL/VPoser assets are license-restricted, so the repo ships only
these synthetic stand-ins (see docs/formats.md for the converter notes).
The builders are seeded and reproducible; scripts/build_toy_assets.py
freezes their output into src/posesynth/assets/.
"""

import numpy as np

from .body_model import BodyModelSpec
from .pose_prior import PosePriorVAE, encode_features, forward_mlp
from .wire import ImageBuffer

TOY_SEED = 20240601

# Median encoder gain per unit of pose norm; calibrated so the mock HMR's
# pose magnitudes (0.15..3.0) straddle the gate threshold 30.
TOY_VAE_GAIN = 25.0

_TET_OFFSETS = np.array([
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
]) * 0.15

_TET_FACES = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])


def build_toy_body_model():
    """12-vertex, 3-joint chain along x: tetrahedra around each joint."""
    joints = np.array([[-0.5, 0.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])
    k = len(joints)
    verts = np.concatenate([j + _TET_OFFSETS for j in joints])
    v = len(verts)
    faces = np.concatenate([_TET_FACES + 4 * i for i in range(k)])

    regressor = np.zeros((k, v))
    for j in range(k):
        regressor[j, 4 * j : 4 * j + 4] = 0.25

    weights = np.zeros((v, k))
    weights[0:4, 0] = 1.0
    weights[4:8] = [0.125, 0.75, 0.125]
    weights[8:12] = [0.0, 0.25, 0.75]

    shape_dirs = np.zeros((v, 3, 2))
    # basis 0: inflate each tetrahedron radially
    shape_dirs[:, :, 0] = np.tile(_TET_OFFSETS / 3.0, (k, 1))
    # basis 1: stretch the whole chain along x
    shape_dirs[:, 0, 1] = verts[:, 0] * 0.1

    rng = np.random.default_rng(TOY_SEED)
    pose_dirs = rng.normal(0.0, 0.004, size=(v, 3, 9 * (k - 1)))

    return BodyModelSpec(
        template_vertices=verts,
        shape_dirs=shape_dirs,
        pose_dirs=pose_dirs,
        joint_regressor=regressor,
        skinning_weights=weights,
        parent=np.array([-1, 0, 1], dtype=np.int64),
        faces=faces.astype(np.int64),
    ).validate()


def _mlp_layers(rng, dims, final_scale=1.0):
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        if i == len(dims) - 2:
            w *= final_scale
            act = "identity"
        else:
            act = "leaky_relu"
        layers.append((w, np.zeros(fan_out), act))
    return layers


def build_toy_pose_prior(latent_dim=8, hidden=32, body_joints=2):
    """Small MLP VAE over axis-angle pose features.

    All biases are zero, so the encoder is positively homogeneous: scaling
    a pose scales its embedding norm linearly, which gives the toy
    checkpoint the harder-pose => larger-norm behavior the gate relies on.
    The final encoder layer is rescaled so the median embedding norm of a
    unit-norm pose is exactly TOY_VAE_GAIN.
    """
    rng = np.random.default_rng(TOY_SEED + 1)
    in_dim = 3 * body_joints
    enc = _mlp_layers(rng, [in_dim, hidden, hidden, 2 * latent_dim])
    dec = _mlp_layers(rng, [latent_dim, hidden, hidden, in_dim])

    vae = PosePriorVAE(tuple(enc), tuple(dec), latent_dim)
    probes = rng.standard_normal((64, in_dim))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    gains = [np.linalg.norm(encode_features(vae, p).mu) for p in probes]
    w_last, b_last, act_last = enc[-1]
    w_last = w_last.copy()
    w_last[:latent_dim] *= TOY_VAE_GAIN / np.median(gains)
    enc[-1] = (w_last, b_last, act_last)
    vae = PosePriorVAE(tuple(enc), tuple(dec), latent_dim)

    # calibrate the decoder too: decode(encode(pose).mu) should land back at
    # pose magnitude, not at embedding magnitude
    recon = [
        np.linalg.norm(forward_mlp(vae.decoder_layers, encode_features(vae, p).mu))
        for p in probes
    ]
    dw_last, db_last, dact_last = dec[-1]
    dec[-1] = (dw_last / np.median(recon), db_last, dact_last)
    return PosePriorVAE(tuple(enc), tuple(dec), latent_dim)


def build_fixture_photo(size=512):
    """Synthetic 'photo': gradient backdrop plus a blocky standing figure.

    Only needs to be non-uniform and stable; committed as a PNG asset for
    the real-image pipeline path.
    """
    rng = np.random.default_rng(TOY_SEED + 2)
    img = np.zeros((size, size, 3), dtype=np.uint8)
    ramp = np.linspace(40, 110, size).astype(np.uint8)
    img[:] = ramp[:, None, None]
    img[..., 2] += 30
    noise = rng.integers(0, 20, size=(16, 16, 3), dtype=np.uint8)
    img += np.repeat(np.repeat(noise, size // 16, 0), size // 16, 1)

    def block(x0, y0, x1, y1, color):
        img[int(y0 * size) : int(y1 * size),
            int(x0 * size) : int(x1 * size)] = color

    skin = (205, 170, 140)
    shirt = (160, 40, 40)
    pants = (40, 40, 120)
    block(0.44, 0.12, 0.56, 0.24, skin)      # head
    block(0.40, 0.24, 0.60, 0.52, shirt)     # torso
    block(0.33, 0.24, 0.40, 0.50, shirt)     # arms
    block(0.60, 0.24, 0.67, 0.50, shirt)
    block(0.41, 0.52, 0.49, 0.88, pants)     # legs
    block(0.51, 0.52, 0.59, 0.88, pants)
    return ImageBuffer.from_array(img)


def random_mesh(rng, n_vertices=12, n_faces=16, spread=1.0):
    """Random triangle soup for rasterizer stress tests and benchmarks."""
    verts = rng.uniform(-spread, spread, size=(n_vertices, 3))
    faces = np.empty((n_faces, 3), dtype=np.int64)
    for i in range(n_faces):
        while True:
            tri = rng.integers(0, n_vertices, size=3)
            if not (tri[0] == tri[1] == tri[2]):
                faces[i] = tri
                break
    from .body_model import Mesh

    return Mesh(verts, faces)
