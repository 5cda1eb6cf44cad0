"""Service configuration (JSON file + overrides)."""

import json
from dataclasses import dataclass, field

# minimal COCO category table for the segmenter wrapper; extend via config
DEFAULT_COCO_CATEGORIES = {
    1: "person", 2: "bicycle", 3: "car", 17: "horse", 18: "sheep",
    19: "cow", 33: "sports ball", 37: "surfboard", 41: "skateboard",
    57: "chair", 61: "dining table",
}


@dataclass
class ServiceConfig:
    adapters: str = "tiny"  # "tiny" | "real"
    weights_path: str = "weights/tiny.pt"
    model_paths: dict = field(default_factory=dict)  # real-adapter ids/paths
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8790
    workers: int = 2
    depth_normalization: str = "passthrough"  # | "midas_style"
    coco_categories: dict = field(default_factory=lambda: dict(DEFAULT_COCO_CATEGORIES))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            obj = json.load(fh)
        cfg = cls(**{k: v for k, v in obj.items() if k in cls.__dataclass_fields__})
        if "coco_categories" in obj:
            cfg.coco_categories = {int(k): v
                                   for k, v in obj["coco_categories"].items()}
        return cfg


def build_adapters(cfg):
    if cfg.adapters == "tiny":
        from .adapters.tiny import TinyAdapters

        return TinyAdapters(cfg.weights_path, device=cfg.device)
    if cfg.adapters == "real":
        from .adapters.real import RealAdapters

        return RealAdapters(cfg)
    from .adapters.base import ServiceStartupError

    raise ServiceStartupError(f"unknown adapter set {cfg.adapters!r}")
