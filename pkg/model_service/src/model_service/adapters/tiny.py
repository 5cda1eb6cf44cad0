"""Tiny locally-generated torch models implementing every endpoint.

These are real networks with procedurally seeded weights, small enough to
run anywhere on CPU. They exist so the serving stack (request handling,
seeding, concurrency, wire conformance) can be exercised and contract-
tested without multi-gigabyte checkpoints; swap in the real adapters for
production generation quality.

Weights live in a checkpoint file created by ``python -m
model_service.make_weights``; the service refuses to start without it.
All parameters are filled from a numpy PCG64 stream (not torch's
initializers), so checkpoints and outputs are reproducible across torch
versions.
"""

import hashlib
import os

import numpy as np
import torch
from torch import nn

from ..payloads import sha256_f32
from .base import ModelAdapters, ServiceStartupError

WEIGHTS_FORMAT = "tiny-adapters/1"
WEIGHTS_SEED = 7151


def _prompt_u64(prompt):
    return int.from_bytes(hashlib.sha256(prompt.encode()).digest()[:8],
                          "little")


def _mix_seed(seed, num_steps, prompt):
    return (seed * 1_000_003 + num_steps) ^ _prompt_u64(prompt)


def _fill_parameters(module, rng):
    """Overwrite all parameters from a numpy stream, fan-in scaled."""
    for name, param in sorted(module.named_parameters(),
                              key=lambda kv: kv[0]):
        shape = tuple(param.shape)
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else 1
        values = rng.normal(0.0, 1.0 / np.sqrt(max(fan_in, 1)), size=shape)
        with torch.no_grad():
            param.copy_(torch.from_numpy(values).to(param.dtype))


class _Generator(nn.Module):
    """4x8x8 noise -> RGB image through transposed convolutions."""

    def __init__(self, image_size=512):
        super().__init__()
        ups = []
        channels = [4, 32, 32, 16, 16, 8]
        size = 8
        i = 0
        while size < image_size:
            c_in = channels[min(i, len(channels) - 1)]
            c_out = channels[min(i + 1, len(channels) - 1)]
            ups.append(nn.ConvTranspose2d(c_in, c_out, 4, stride=2, padding=1))
            ups.append(nn.LeakyReLU(0.2))
            size *= 2
            i += 1
        self.body = nn.Sequential(*ups)
        self.head = nn.Conv2d(channels[min(i, len(channels) - 1)], 3, 3,
                              padding=1)

    def forward(self, z):
        return torch.sigmoid(self.head(self.body(z)))


class _Encoder(nn.Module):
    """RGB image -> (4, H/8-per-64, ...) latents via a stride-8 conv."""

    def __init__(self, image_size=512):
        super().__init__()
        stride = image_size // 64
        self.conv = nn.Conv2d(3, 4, kernel_size=stride, stride=stride)

    def forward(self, x):
        return self.conv(x)


class _DepthConditioner(nn.Module):
    """(latents + depth) -> RGB image."""

    def __init__(self, image_size=512):
        super().__init__()
        self.fuse = nn.Conv2d(5, 4, 3, padding=1)
        self.generator = _Generator(image_size)
        # the generator expects 8x8 input; pool the 64x64 fused latents
        self.pool = nn.AvgPool2d(8)

    def forward(self, z, depth):
        fused = torch.relu(self.fuse(torch.cat([z, depth], dim=1)))
        return self.generator(self.pool(fused))


class _HmrHead(nn.Module):
    def __init__(self, n_body_joints, n_betas):
        super().__init__()
        self.features = nn.Conv2d(3, 8, kernel_size=16, stride=16)
        self.head = nn.Linear(8, 3 * n_body_joints + 3 + n_betas + 3 + 1)

    def forward(self, x):
        feat = torch.relu(self.features(x)).mean(dim=(2, 3))
        return self.head(feat)


class _Segmenter(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = nn.Conv2d(3, 2, kernel_size=16, stride=16)

    def forward(self, x):
        return self.conv(x)


SEGMENT_LABELS = ("chair", "ball")


def build_modules(image_size, n_body_joints, n_betas):
    rng = np.random.default_rng(WEIGHTS_SEED)
    modules = {
        "generator": _Generator(image_size),
        "encoder": _Encoder(image_size),
        "depth_conditioner": _DepthConditioner(image_size),
        "hmr": _HmrHead(n_body_joints, n_betas),
        "segmenter": _Segmenter(),
    }
    for name in sorted(modules):
        _fill_parameters(modules[name], rng)
    # shrink the HMR head so predicted poses stay near the rest pose
    with torch.no_grad():
        modules["hmr"].head.weight *= 0.05
        modules["hmr"].head.bias *= 0.05
    return modules


def write_weights(path, image_size=512, n_body_joints=2, n_betas=2):
    modules = build_modules(image_size, n_body_joints, n_betas)
    payload = {
        "format": WEIGHTS_FORMAT,
        "image_size": image_size,
        "n_body_joints": n_body_joints,
        "n_betas": n_betas,
        "state": {name: m.state_dict() for name, m in modules.items()},
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    torch.save(payload, path)
    return path


class TinyAdapters(ModelAdapters):
    model_id = "tiny-local"

    def __init__(self, weights_path, device="cpu"):
        if not os.path.exists(weights_path):
            raise ServiceStartupError(
                f"tiny adapter weights not found at {weights_path!r}; "
                "generate them with `python -m model_service.make_weights "
                f"--out {weights_path}`"
            )
        try:
            payload = torch.load(weights_path, map_location="cpu",
                                 weights_only=True)
        except Exception as exc:
            raise ServiceStartupError(
                f"cannot load weights {weights_path!r}: {exc}") from exc
        if payload.get("format") != WEIGHTS_FORMAT:
            raise ServiceStartupError(
                f"{weights_path!r} has format {payload.get('format')!r}, "
                f"expected {WEIGHTS_FORMAT}"
            )
        self.image_size = int(payload["image_size"])
        self.n_body_joints = int(payload["n_body_joints"])
        self.n_betas = int(payload["n_betas"])
        self.device = torch.device(device)
        self.modules = build_modules(self.image_size, self.n_body_joints,
                                     self.n_betas)
        for name, module in self.modules.items():
            try:
                module.load_state_dict(payload["state"][name])
            except (KeyError, RuntimeError) as exc:
                raise ServiceStartupError(
                    f"weights for {name!r} unusable: {exc}") from exc
            module.to(self.device).eval()

    def _image_tensor(self, image):
        arr = np.asarray(image, dtype=np.float32) / 255.0
        return torch.from_numpy(arr).permute(2, 0, 1)[None].to(self.device)

    @staticmethod
    def _to_uint8(img_tensor):
        arr = img_tensor[0].permute(1, 2, 0).cpu().numpy()
        return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)

    def txt2img(self, prompt, seed, num_steps, strength, guidance):
        gen = torch.Generator().manual_seed(_mix_seed(seed, num_steps, prompt)
                                            % 2 ** 63)
        z = torch.randn(1, 4, 8, 8, generator=gen).to(self.device)
        with torch.inference_mode():
            out = self.modules["generator"](z)
        return self._to_uint8(out)

    def encode(self, image):
        with torch.inference_mode():
            lat = self.modules["encoder"](self._image_tensor(image))
        return lat[0].cpu().numpy().astype(np.float32)

    def depth2img(self, latents, depth, prompt, seed, num_steps, strength,
                  guidance):
        trace = {
            "latents_sha256": sha256_f32(latents),
            "depth_sha256": sha256_f32(depth),
        }
        gen = torch.Generator().manual_seed(_mix_seed(seed, num_steps, prompt)
                                            % 2 ** 63)
        z = torch.from_numpy(latents)[None].to(self.device)
        noise = torch.randn(z.shape, generator=gen).to(self.device)
        z_noised = z + float(strength) * noise
        d = torch.from_numpy(depth)[None, None].to(self.device)
        with torch.inference_mode():
            out = self.modules["depth_conditioner"](z_noised, d)
        return self._to_uint8(out), trace

    def hmr(self, image):
        with torch.inference_mode():
            out = self.modules["hmr"](self._image_tensor(image))[0]
        vec = out.cpu().numpy().astype(np.float64)
        j3 = 3 * self.n_body_joints
        body = vec[:j3]
        orient = vec[j3 : j3 + 3]
        betas = vec[j3 + 3 : j3 + 3 + self.n_betas]
        cam_raw = vec[j3 + 3 + self.n_betas : j3 + 6 + self.n_betas]
        conf = float(1.0 / (1.0 + np.exp(-vec[-1])))
        h, w = image.shape[:2]
        return [{
            "body_pose": [float(v) for v in body],
            "global_orient": [float(v) for v in orient],
            "betas": [float(v) for v in betas],
            "camera": {
                "scale": float(0.6 + 0.2 / (1.0 + np.exp(-cam_raw[0]))),
                "tx": float(0.1 * np.tanh(cam_raw[1])),
                "ty": float(0.1 * np.tanh(cam_raw[2])),
                "width": int(w),
                "height": int(h),
            },
            "confidence": conf,
        }]

    def segment(self, image):
        from ..payloads import encode_rle

        with torch.inference_mode():
            act = self.modules["segmenter"](self._image_tensor(image))[0]
        act = act.cpu().numpy()
        h, w = image.shape[:2]
        stride = 16
        instances = []
        for c, label in enumerate(SEGMENT_LABELS):
            channel = act[c]
            cut = np.quantile(channel, 0.8)
            coarse = channel > cut
            if not coarse.any():
                continue
            mask = np.repeat(np.repeat(coarse, stride, 0), stride, 1)
            mask = mask[:h, :w]
            score = float(1.0 / (1.0 + np.exp(-channel.mean())))
            instances.append({
                "class_label": label,
                "score": min(1.0, max(0.0, score)),
                "mask_rle": encode_rle(mask),
            })
        return instances
