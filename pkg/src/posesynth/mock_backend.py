"""Deterministic in-process mock for all five backend endpoints.

Every response is a pure function of the request, built from the
procedural rules below (also documented in docs/mock.md so tests can
recompute expected outputs independently):

* txt2img: integer-arithmetic image ``(gx>>2) + (gy>>2) + (color>>2) +
  (noise>>2)`` where gx/gy are 0..255 axis gradients, ``color`` is the
  first three bytes of sha256(prompt), and ``noise`` is an 8x8 uint8 block
  grid drawn from PCG64 seeded with (seed, num_steps, prompt digest).
* encode: 64x64 block means of the RGB channels scaled to [0,1] as
  channels 0-2, their mean as channel 3; float32.
* depth2img: the txt2img image for the same (prompt, seed, num_steps)
  with every depth>0 pixel (nearest-upsampled) replaced by the gray value
  ``round(d*255)``; all-zero depth therefore reproduces txt2img exactly.
* hmr: people drawn from PCG64 seeded with the sha256 of the raw pixels;
  a uniform image means "no person found". Responses use the combined
  72-style ``pose`` convention so clients exercise normalization.
* segment: 0-3 axis-aligned rectangles with labels from a fixed list,
  drawn from the pixel digest.
"""

import hashlib

import numpy as np

from . import wire
from .errors import ValidationError

MODEL_ID = "posesynth-mock"

_HMR_SALT = 0x68D2
_SEG_SALT = 0x5E61

SEGMENT_CLASSES = ("chair", "ball", "person", "horse")


def _prompt_digest(prompt):
    return hashlib.sha256(prompt.encode("utf-8")).digest()


def _digest_u64(digest):
    return int.from_bytes(digest[:8], "little")


class MockBackend:
    """Stateless, thread-safe procedural backend.

    ``canned_hmr`` maps an image pixel sha256 hex digest to a list of
    wire-format person dicts, overriding the procedural HMR rule for that
    image (used to stage easy/hard poses in tests).
    """

    def __init__(self, image_size=wire.DEFAULT_IMAGE_SIZE, n_body_joints=2,
                 n_betas=2, canned_hmr=None):
        if image_size % 64:
            raise ValidationError("mock image size must be divisible by 64")
        self.image_size = int(image_size)
        self.n_body_joints = int(n_body_joints)
        self.n_betas = int(n_betas)
        self.canned_hmr = dict(canned_hmr or {})
        self.model_id = MODEL_ID

    # ------------------------------------------------------------ txt2img

    def txt2img(self, req):
        req.require_prompt()
        return self._procedural_image(req.prompt, req.seed, req.num_steps)

    def _procedural_image(self, prompt, seed, num_steps):
        size = self.image_size
        digest = _prompt_digest(prompt)
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), int(num_steps), _digest_u64(digest)])
        )
        noise = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        block = size // 8
        noise_up = np.repeat(np.repeat(noise, block, axis=0), block, axis=1)
        coords = (np.arange(size, dtype=np.uint16) * 256) // size
        gx = (coords >> 2).astype(np.uint8)[None, :, None]
        gy = (coords >> 2).astype(np.uint8)[:, None, None]
        color = (np.frombuffer(digest[:3], dtype=np.uint8) >> 2)[None, None, :]
        img = gx + gy + color + (noise_up >> 2)
        return wire.ImageBuffer.from_array(img.astype(np.uint8))

    # ------------------------------------------------------------- encode

    def encode_latents(self, img):
        c, lh, lw = wire.DEFAULT_LATENT_SHAPE
        if img.height % lh or img.width % lw:
            raise ValidationError(
                f"mock encoder needs dimensions divisible by {lw}, "
                f"got {img.width}x{img.height}"
            )
        arr = img.to_array().astype(np.float64)
        bh, bw = img.height // lh, img.width // lw
        blocks = arr.reshape(lh, bh, lw, bw, 3).mean(axis=(1, 3))
        rgb = blocks / 255.0
        luma = rgb.mean(axis=2)
        lat = np.concatenate([np.moveaxis(rgb, 2, 0), luma[None]], axis=0)
        return wire.Latents(lat.astype(np.float32))

    # ---------------------------------------------------------- depth2img

    def depth2img(self, latents, depth, req):
        req.require_prompt()
        c, lh, lw = latents.shape
        if (depth.height, depth.width) != (lh, lw):
            raise ValidationError(
                f"depth {depth.width}x{depth.height} does not match latent "
                f"spatial dims {lw}x{lh}"
            )
        base = self._procedural_image(req.prompt, req.seed, req.num_steps)
        size = self.image_size
        if size % lw or size % lh:
            raise ValidationError("latent dims must divide the image size")
        d32 = depth.to_float32()
        up = np.repeat(np.repeat(d32, size // lh, axis=0), size // lw, axis=1)
        mask = up > 0
        arr = base.to_array().copy()
        gray = np.clip(np.rint(up * 255.0), 0, 255).astype(np.uint8)
        arr[mask] = gray[mask][:, None]
        trace = {
            "latents_sha256": latents.sha256(),
            "depth_sha256": hashlib.sha256(d32.tobytes()).hexdigest(),
        }
        return wire.ImageBuffer.from_array(arr), trace

    # ---------------------------------------------------------------- hmr

    def hmr_wire(self, img):
        """Wire-format people list (combined-pose convention)."""
        digest = hashlib.sha256(img.data).digest()
        canned = self.canned_hmr.get(digest.hex())
        if canned is not None:
            return [dict(p) for p in canned]
        arr = img.to_array()
        if (arr == arr.reshape(-1, 3)[0]).all():
            return []  # featureless image: nobody found
        rng = np.random.default_rng(
            np.random.SeedSequence([_digest_u64(digest), _HMR_SALT])
        )
        count = 2 if digest[8] < 64 else 1
        people = []
        for i in range(count):
            u = rng.standard_normal(3 * self.n_body_joints)
            magnitude = 0.15 + 2.85 * rng.random()
            body = u / np.linalg.norm(u) * magnitude
            orient = rng.normal(0.0, 0.3, 3)
            betas = rng.normal(0.0, 0.5, self.n_betas)
            cam_scale = 0.55 + 0.3 * rng.random()
            tx, ty = rng.uniform(-0.1, 0.1, 2)
            confidence = min(1.0, max(0.0, 0.95 - 0.25 * i - 0.2 * rng.random()))
            people.append({
                "pose": [float(v) for v in np.concatenate([orient, body])],
                "betas": [float(v) for v in betas],
                "camera": {
                    "scale": float(cam_scale),
                    "tx": float(tx),
                    "ty": float(ty),
                    "width": img.width,
                    "height": img.height,
                },
                "confidence": float(confidence),
            })
        return people

    def hmr(self, img):
        return [wire.person_from_json(p) for p in self.hmr_wire(img)]

    # ------------------------------------------------------------ segment

    def segment_wire(self, img):
        digest = hashlib.sha256(img.data).digest()
        arr = img.to_array()
        if (arr == arr.reshape(-1, 3)[0]).all():
            return []
        rng = np.random.default_rng(
            np.random.SeedSequence([_digest_u64(digest), _SEG_SALT])
        )
        h, w = img.height, img.width
        instances = []
        for _ in range(int(rng.integers(0, 4))):
            label = SEGMENT_CLASSES[int(rng.integers(0, len(SEGMENT_CLASSES)))]
            x0 = int(rng.integers(0, w - 1))
            y0 = int(rng.integers(0, h - 1))
            x1 = min(w, x0 + int(rng.integers(w // 16, w // 4 + 1)))
            y1 = min(h, y0 + int(rng.integers(h // 16, h // 4 + 1)))
            mask = np.zeros((h, w), dtype=bool)
            mask[y0:y1, x0:x1] = True
            instances.append({
                "class_label": label,
                "score": float(0.5 + 0.5 * rng.random()),
                "mask_rle": wire.encode_rle(mask),
            })
        return instances

    def segment(self, img):
        return [wire.instance_from_json(i) for i in self.segment_wire(img)]
