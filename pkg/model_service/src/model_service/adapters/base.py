"""Adapter contract each model family implements.

Adapters work in plain numpy at the HTTP boundary; hmr/segment return
wire-format dicts so the app layer stays a thin translator.
"""


class ServiceStartupError(RuntimeError):
    """Model weights unavailable or unloadable; the service must refuse
    to start with a diagnostic."""


class ModelAdapters:
    """Interface; see tiny.TinyAdapters for the reference implementation.

    Methods may be called from multiple worker threads concurrently and
    must be stateless apart from immutable model weights.
    """

    model_id = "unconfigured"

    def txt2img(self, prompt, seed, num_steps, strength, guidance):
        """-> uint8 (H, W, 3)"""
        raise NotImplementedError

    def encode(self, image):
        """uint8 (H, W, 3) -> float32 (4, 64, 64)"""
        raise NotImplementedError

    def depth2img(self, latents, depth, prompt, seed, num_steps, strength,
                  guidance):
        """latents float32 (C,h,w), depth float32 (h,w) -> (image, trace)"""
        raise NotImplementedError

    def hmr(self, image):
        """-> list of wire person dicts"""
        raise NotImplementedError

    def segment(self, image):
        """-> list of wire instance dicts"""
        raise NotImplementedError
