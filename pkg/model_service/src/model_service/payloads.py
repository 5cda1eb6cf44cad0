"""Wire payload codecs, written against the frozen API document
(docs/api.md in the pipeline repo). Deliberately independent of the
pipeline package: this service talks to it only over HTTP.
"""

import base64
import hashlib
import io

import numpy as np
from PIL import Image

API_VERSION = "1.0"


class PayloadError(ValueError):
    """Invalid request payload -> HTTP 400."""


def decode_image(obj, context="image"):
    """Image JSON -> uint8 (H, W, 3)."""
    try:
        raw = base64.b64decode(obj["png_b64"])
        pil = Image.open(io.BytesIO(raw)).convert("RGB")
    except Exception as exc:
        raise PayloadError(f"{context}: undecodable image payload: {exc}") from exc
    if pil.width != obj.get("width") or pil.height != obj.get("height"):
        raise PayloadError(f"{context}: declared size disagrees with PNG")
    return np.asarray(pil, dtype=np.uint8)


def encode_image(arr):
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    pil = Image.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG", optimize=False)
    return {
        "width": int(arr.shape[1]),
        "height": int(arr.shape[0]),
        "png_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
    }


def decode_latents(obj, context="latents"):
    try:
        shape = tuple(int(v) for v in obj["shape"])
        raw = base64.b64decode(obj["data_b64"])
    except Exception as exc:
        raise PayloadError(f"{context}: malformed latents payload") from exc
    if len(shape) != 3 or len(raw) != 4 * int(np.prod(shape)):
        raise PayloadError(f"{context}: latent byte count / shape mismatch")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def encode_latents(arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return {
        "shape": [int(s) for s in arr.shape],
        "data_b64": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_depth(obj, context="depth"):
    try:
        w, h = int(obj["width"]), int(obj["height"])
        raw = base64.b64decode(obj["data_b64"])
    except Exception as exc:
        raise PayloadError(f"{context}: malformed depth payload") from exc
    if len(raw) != 4 * w * h:
        raise PayloadError(f"{context}: depth byte count mismatch")
    return np.frombuffer(raw, dtype="<f4").reshape(h, w).copy()


def encode_rle(mask):
    """Boolean (H, W) -> COCO-style uncompressed RLE (column-major)."""
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
    try:
        h, w = (int(v) for v in rle["size"])
        counts = [int(c) for c in rle["counts"]]
    except Exception as exc:
        raise PayloadError(f"{context}: malformed RLE payload") from exc
    if sum(counts) != h * w or any(c < 0 for c in counts):
        raise PayloadError(f"{context}: inconsistent RLE counts")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    return np.repeat(values, counts).reshape((h, w), order="F")


def parse_generation_fields(payload):
    """Shared txt2img / depth2img request fields, validated."""
    try:
        prompt = payload["prompt"]
        seed = int(payload["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise PayloadError(f"request is missing prompt/seed: {exc}") from exc
    num_steps = int(payload.get("num_steps", 50))
    strength = float(payload.get("strength", 0.8))
    guidance = payload.get("guidance", {})
    if not prompt:
        raise PayloadError("prompt must be nonempty")
    if seed < 0:
        raise PayloadError("seed must be >= 0")
    if num_steps < 1:
        raise PayloadError("num_steps must be >= 1")
    if not (0.0 < strength <= 1.0):
        raise PayloadError("strength must be in (0, 1]")
    if not isinstance(guidance, dict):
        raise PayloadError("guidance must be an object")
    return prompt, seed, num_steps, strength, guidance


def sha256_f32(arr):
    return hashlib.sha256(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()
    ).hexdigest()
