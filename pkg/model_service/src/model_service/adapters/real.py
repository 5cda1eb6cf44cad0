"""Wrappers around production models (optional extra: model-service[real]).

Each wrapper loads from a local path/id given in the service config and
refuses to start with a diagnostic when the library or weights are
missing. GPU is optional; CPU inference works but is slow.

The depth-to-image wrapper feeds our rendered body depth directly as the
conditioning channel, bypassing the checkpoint's bundled monocular depth
estimator. Checkpoints finetuned on estimator-style disparity may expect
a different scaling, so ``depth_normalization`` selects between
``passthrough`` (use the pipeline's [0.05, 1] map as-is) and
``midas_style`` (rescale to zero-min disparity with unit max).

There is no standard library for mesh recovery; ``hmr_module`` names a
user-supplied ``module:factory`` returning an object with the adapter's
``hmr(image)`` signature, so any locally installed HMR network can be
plugged in.
"""

import importlib

import numpy as np

from .base import ModelAdapters, ServiceStartupError


def _require(module_name, extra):
    try:
        return importlib.import_module(module_name)
    except ImportError as exc:
        raise ServiceStartupError(
            f"{module_name} is required for the real adapters; install "
            f"model-service[{extra}] ({exc})"
        ) from exc


class RealAdapters(ModelAdapters):
    """Stable-Diffusion-style generation + torchvision segmentation."""

    model_id = "real-models"

    def __init__(self, config):
        torch = _require("torch", "real")
        diffusers = _require("diffusers", "real")
        torchvision = _require("torchvision", "real")

        self.device = config.device
        self.depth_normalization = config.depth_normalization
        paths = config.model_paths
        for key in ("txt2img", "depth2img"):
            if key not in paths:
                raise ServiceStartupError(
                    f"config.model_paths[{key!r}] must point at a local "
                    "diffusers checkpoint"
                )
        try:
            self.t2i = diffusers.StableDiffusionPipeline.from_pretrained(
                paths["txt2img"], local_files_only=True)
            self.d2i = diffusers.StableDiffusionDepth2ImgPipeline.from_pretrained(
                paths["depth2img"], local_files_only=True)
        except Exception as exc:
            raise ServiceStartupError(f"cannot load diffusion weights: {exc}") from exc
        self.t2i.to(self.device)
        self.d2i.to(self.device)

        weights_arg = paths.get("segmenter", "DEFAULT")
        try:
            self.mask_rcnn = torchvision.models.detection.maskrcnn_resnet50_fpn(
                weights=weights_arg)
        except Exception as exc:
            raise ServiceStartupError(
                f"cannot load Mask R-CNN weights: {exc}") from exc
        self.mask_rcnn.to(self.device).eval()
        self.coco_categories = config.coco_categories

        hmr_spec = paths.get("hmr_module")
        if not hmr_spec or ":" not in hmr_spec:
            raise ServiceStartupError(
                "config.model_paths['hmr_module'] must be 'module:factory' "
                "for a locally installed mesh-recovery model"
            )
        mod_name, factory = hmr_spec.split(":", 1)
        try:
            self.hmr_model = getattr(importlib.import_module(mod_name),
                                     factory)(config)
        except Exception as exc:
            raise ServiceStartupError(
                f"cannot construct HMR adapter {hmr_spec!r}: {exc}") from exc

    # -- generation -----------------------------------------------------

    def txt2img(self, prompt, seed, num_steps, strength, guidance):
        import torch

        gen = torch.Generator(self.device).manual_seed(seed)
        out = self.t2i(prompt, num_inference_steps=num_steps, generator=gen,
                       **guidance)
        return np.asarray(out.images[0].convert("RGB"), dtype=np.uint8)

    def encode(self, image):
        import torch

        vae = self.d2i.vae
        x = torch.from_numpy(np.asarray(image, np.float32) / 127.5 - 1.0)
        x = x.permute(2, 0, 1)[None].to(self.device)
        with torch.inference_mode():
            lat = vae.encode(x).latent_dist.mean * vae.config.scaling_factor
        return lat[0].cpu().numpy().astype(np.float32)

    def _conditioning_depth(self, depth):
        if self.depth_normalization == "midas_style":
            fg = depth > 0
            if fg.any():
                d = depth - depth[fg].min()
                top = d.max()
                if top > 0:
                    depth = d / top
        return depth

    def depth2img(self, latents, depth, prompt, seed, num_steps, strength,
                  guidance):
        import torch

        from ..payloads import sha256_f32

        trace = {"latents_sha256": sha256_f32(latents),
                 "depth_sha256": sha256_f32(depth)}
        gen = torch.Generator(self.device).manual_seed(seed)
        depth_map = torch.from_numpy(
            self._conditioning_depth(depth))[None].to(self.device)
        lat = torch.from_numpy(latents)[None].to(self.device)
        image = self.d2i.vae.decode(
            lat / self.d2i.vae.config.scaling_factor).sample
        out = self.d2i(prompt=prompt, image=image, depth_map=depth_map,
                       strength=strength, num_inference_steps=num_steps,
                       generator=gen, **guidance)
        return np.asarray(out.images[0].convert("RGB"), dtype=np.uint8), trace

    # -- perception -----------------------------------------------------

    def hmr(self, image):
        return self.hmr_model.hmr(image)

    def segment(self, image, score_threshold=0.5):
        import torch

        from ..payloads import encode_rle

        x = torch.from_numpy(np.asarray(image, np.float32) / 255.0)
        x = x.permute(2, 0, 1).to(self.device)
        with torch.inference_mode():
            pred = self.mask_rcnn([x])[0]
        instances = []
        for label_id, score, mask in zip(pred["labels"], pred["scores"],
                                         pred["masks"]):
            score = float(score)
            if score < score_threshold:
                continue
            name = self.coco_categories.get(int(label_id), str(int(label_id)))
            instances.append({
                "class_label": name,
                "score": min(1.0, max(0.0, score)),
                "mask_rle": encode_rle(mask[0].cpu().numpy() > 0.5),
            })
        return instances
