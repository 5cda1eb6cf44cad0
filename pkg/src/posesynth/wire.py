"""Wire protocol for the generative/perception backends.

HTTP + JSON; images travel as base64 PNG, latents as base64 little-endian
float32, masks as COCO-style run-length encodings (column-major, counts
alternating runs of 0s and 1s, starting with the zero run). Field names
are frozen in docs/api.md. Every response echoes ``api_version``,
``model_id`` and, where a sampler ran, ``seed``.
"""

import base64
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .body_model import PoseParams, ShapeParams
from .camera import WeakPerspectiveCamera
from .depthmap import DepthMap
from .errors import ProtocolError, ValidationError

API_VERSION = "1.0"

ENDPOINTS = ("txt2img", "encode", "depth2img", "hmr", "segment")

DEFAULT_IMAGE_SIZE = 512
DEFAULT_LATENT_SHAPE = (4, 64, 64)
DEFAULT_NUM_STEPS = 50
DEFAULT_STRENGTH = 0.8


def check_api_version(payload, context=""):
    """Reject version mismatches instead of silently coercing."""
    version = payload.get("api_version")
    if version is None:
        raise ProtocolError(f"{context}: response carries no api_version")
    if str(version).split(".")[0] != API_VERSION.split(".")[0]:
        raise ProtocolError(
            f"{context}: api_version {version!r} is incompatible with "
            f"client version {API_VERSION}"
        )


# ----------------------------------------------------------------- images

@dataclass(frozen=True)
class ImageBuffer:
    """RGB8 raster; ``data`` holds exactly 3*width*height bytes."""

    width: int
    height: int
    data: bytes

    def __post_init__(self):
        if len(self.data) != 3 * self.width * self.height:
            raise ValidationError(
                f"image payload is {len(self.data)} bytes, expected "
                f"{3 * self.width * self.height} for {self.width}x{self.height}"
            )

    @classmethod
    def from_array(cls, arr):
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"image array must be (H,W,3), got {arr.shape}")
        return cls(arr.shape[1], arr.shape[0], arr.tobytes())

    def to_array(self):
        return np.frombuffer(self.data, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )

    def sha256(self):
        """Digest of the raw pixel bytes (container-independent)."""
        return hashlib.sha256(self.data).hexdigest()


def encode_png(img):
    """Canonical PNG bytes for an ImageBuffer (single encoder everywhere,
    so identical pixels always yield identical files)."""
    pil = Image.frombytes("RGB", (img.width, img.height), img.data)
    buf = io.BytesIO()
    pil.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def decode_png(png_bytes):
    try:
        pil = Image.open(io.BytesIO(png_bytes))
        pil = pil.convert("RGB")
    except Exception as exc:
        raise ProtocolError(f"undecodable PNG payload: {exc}") from exc
    return ImageBuffer(pil.width, pil.height, pil.tobytes())


def image_to_json(img):
    return {
        "width": img.width,
        "height": img.height,
        "png_b64": base64.b64encode(encode_png(img)).decode("ascii"),
    }


def image_from_json(obj, context="image"):
    try:
        img = decode_png(base64.b64decode(obj["png_b64"]))
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"{context}: malformed image object") from exc
    if img.width != obj.get("width") or img.height != obj.get("height"):
        raise ProtocolError(f"{context}: declared size disagrees with PNG")
    return img


# ---------------------------------------------------------------- latents

@dataclass(frozen=True)
class Latents:
    """Compressed image latents, float32, default shape (4, 64, 64)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.data, dtype=np.float32)
        if d.ndim != 3:
            raise ValidationError(f"latents must be (C,H,W), got shape {d.shape}")
        if not np.isfinite(d).all():
            raise ValidationError("non-finite latent values")
        object.__setattr__(self, "data", d)

    @property
    def shape(self):
        return tuple(self.data.shape)

    def sha256(self):
        return hashlib.sha256(self.data.astype("<f4").tobytes()).hexdigest()


def latents_to_json(lat):
    return {
        "shape": list(lat.shape),
        "data_b64": base64.b64encode(lat.data.astype("<f4").tobytes()).decode("ascii"),
    }


def latents_from_json(obj, context="latents"):
    try:
        shape = tuple(int(s) for s in obj["shape"])
        raw = base64.b64decode(obj["data_b64"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"{context}: malformed latents object") from exc
    expected = 4 * int(np.prod(shape))
    if len(raw) != expected:
        raise ProtocolError(
            f"{context}: {len(raw)} payload bytes, expected {expected} "
            f"for shape {shape}"
        )
    return Latents(np.frombuffer(raw, dtype="<f4").reshape(shape).copy())


def depth_to_json(depth):
    return {
        "width": depth.width,
        "height": depth.height,
        "data_b64": base64.b64encode(depth.to_float32().tobytes()).decode("ascii"),
    }


def depth_from_json(obj, context="depth"):
    try:
        w, h = int(obj["width"]), int(obj["height"])
        raw = base64.b64decode(obj["data_b64"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"{context}: malformed depth object") from exc
    if len(raw) != 4 * w * h:
        raise ProtocolError(f"{context}: depth payload size mismatch")
    return DepthMap(np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64))


# ------------------------------------------------------------------- RLE

def encode_rle(mask):
    """Boolean (H,W) raster -> COCO-style uncompressed RLE."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.reshape(-1, order="F")
    if flat.size == 0:
        return {"size": [int(h), int(w)], "counts": []}
    change = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return {"size": [int(h), int(w)], "counts": [int(c) for c in counts]}


def decode_rle(rle, context="mask"):
    """COCO-style RLE -> boolean (H,W) raster."""
    try:
        h, w = (int(v) for v in rle["size"])
        counts = [int(c) for c in rle["counts"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"{context}: malformed RLE object") from exc
    if any(c < 0 for c in counts):
        raise ProtocolError(f"{context}: negative RLE count")
    if sum(counts) != h * w:
        raise ProtocolError(
            f"{context}: RLE counts sum to {sum(counts)}, expected {h * w}"
        )
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((h, w), order="F")


def resample_mask(mask, size):
    """Resize a boolean raster to (W, H): a target cell is set iff any
    source pixel mapping into its box is set (conservative for occluders).
    """
    src = np.asarray(mask, dtype=bool)
    sh, sw = src.shape
    w, h = int(size[0]), int(size[1])
    if (sh, sw) == (h, w):
        return src.copy()
    out = np.zeros((h, w), dtype=bool)
    for iy in range(h):
        y0 = (iy * sh) // h
        y1 = max(((iy + 1) * sh) // h, y0 + 1)
        row = src[y0:y1]
        for ix in range(w):
            x0 = (ix * sw) // w
            x1 = max(((ix + 1) * sw) // w, x0 + 1)
            if row[:, x0:x1].any():
                out[iy, ix] = True
    return out


# -------------------------------------------------------------- requests

@dataclass(frozen=True)
class GenerationRequest:
    """Knobs shared by txt2img and depth2img calls."""

    prompt: str
    seed: int
    num_steps: int = DEFAULT_NUM_STEPS
    strength: float = DEFAULT_STRENGTH
    guidance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        if self.num_steps < 1:
            raise ValidationError("num_steps must be >= 1")
        if not (0.0 < self.strength <= 1.0):
            raise ValidationError("strength must be in (0, 1]")

    def require_prompt(self):
        if not self.prompt:
            raise ValidationError("prompt must be nonempty")
        return self

    def to_json(self):
        return {
            "prompt": self.prompt,
            "seed": int(self.seed),
            "num_steps": int(self.num_steps),
            "strength": float(self.strength),
            "guidance": dict(self.guidance),
        }

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(
                prompt=obj["prompt"],
                seed=int(obj["seed"]),
                num_steps=int(obj.get("num_steps", DEFAULT_NUM_STEPS)),
                strength=float(obj.get("strength", DEFAULT_STRENGTH)),
                guidance=dict(obj.get("guidance", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed generation request: {exc}") from exc


# ------------------------------------------------------- model responses

@dataclass(frozen=True)
class HmrPerson:
    theta: PoseParams
    beta: ShapeParams
    camera: WeakPerspectiveCamera
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ProtocolError(
                f"person confidence {self.confidence} outside [0, 1]"
            )


def person_to_json(person):
    return {
        "body_pose": person.theta.body_pose.reshape(-1).tolist(),
        "global_orient": person.theta.global_orient.tolist(),
        "betas": person.beta.betas.tolist(),
        "camera": person.camera.to_dict(),
        "confidence": float(person.confidence),
    }


def person_from_json(obj, context="person"):
    """Parse one HMR person, normalizing the pose convention.

    Backends either split the pose into ``body_pose`` + ``global_orient``
    or send one combined ``pose`` vector whose first three entries are the
    global orientation; both are accepted.
    """
    try:
        if "pose" in obj:
            combined = np.asarray(obj["pose"], dtype=np.float64).reshape(-1)
            if combined.size < 6 or combined.size % 3:
                raise ProtocolError(
                    f"{context}: combined pose length {combined.size} "
                    "is not a multiple of 3 with a leading orient triple"
                )
            theta = PoseParams(combined[3:].reshape(-1, 3), combined[:3])
        else:
            theta = PoseParams(
                np.asarray(obj["body_pose"], dtype=np.float64).reshape(-1, 3),
                np.asarray(obj["global_orient"], dtype=np.float64).reshape(3),
            )
        return HmrPerson(
            theta=theta,
            beta=ShapeParams(np.asarray(obj["betas"], dtype=np.float64)),
            camera=WeakPerspectiveCamera.from_dict(obj["camera"]),
            confidence=float(obj["confidence"]),
        )
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"{context}: malformed person object: {exc}") from exc


@dataclass(frozen=True)
class SegmentInstance:
    class_label: str
    mask_rle: dict
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ProtocolError(f"instance score {self.score} outside [0, 1]")


def instance_to_json(inst):
    return {
        "class_label": inst.class_label,
        "score": float(inst.score),
        "mask_rle": inst.mask_rle,
    }


def instance_from_json(obj, context="instance"):
    try:
        inst = SegmentInstance(
            class_label=str(obj["class_label"]),
            mask_rle={"size": list(obj["mask_rle"]["size"]),
                      "counts": list(obj["mask_rle"]["counts"])},
            score=float(obj["score"]),
        )
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"{context}: malformed instance object: {exc}") from exc
    decode_rle(inst.mask_rle, context=context)  # validates counts
    return inst
