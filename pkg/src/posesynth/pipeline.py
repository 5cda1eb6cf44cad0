"""End-to-end generation pipeline.

Per input: initial image (text-to-image, or a real photo), mesh estimation
via the HMR backend, pose-difficulty gate, optional latent-space pose
augmentation fan-out, depth render + occlusion composition, and
depth-conditioned regeneration. Emits images with (theta, beta, camera)
ground truth plus full provenance into a dataset directory.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import __version__
from .body_model import forward
from .compose import apply_occlusion, filter_occluders, union_masks, MaskImage
from .depthmap import DepthMap, write_depth
from .errors import (BackendError, ProtocolError, ShapeError,
                     ValidationError)
from .pose_prior import (AugmentationConfig, augment_pose, difficulty_score,
                         is_hard_pose)
from .raster import normalize_for_conditioning, render_depth
from .wire import (GenerationRequest, ImageBuffer, decode_rle, encode_png,
                   encode_rle, person_from_json, person_to_json, resample_mask)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

# purpose codes for per-task seed derivation
_SEED_TXT2IMG = 1
_SEED_DEPTH2IMG = 2
_SEED_AUGMENT = 3
_SEED_SCORE = 4


@dataclass(frozen=True)
class PipelineConfig:
    """All generation knobs; defaults follow the documented pipeline."""

    tau: float = 30.0
    augmentations_per_input: int = 3
    aug_scale: float = 0.1
    epsilon_range: float = 1.0
    depth_size: tuple = (64, 64)
    strength: float = 0.8
    num_steps: int = 50
    seed: int = 0
    score_mode: str = "mean"  # "mean" | "sample"
    person_policy: str = "highest_confidence"  # | "merged"
    person_classes: tuple = ("person",)
    emit_ungated: bool = True
    jobs: int = 4
    prompt_template: str = "a photo of a person"
    category: str = ""
    person_phrase: str = ""

    def __post_init__(self):
        if self.tau < 0:
            raise ValidationError("tau must be >= 0")
        if self.augmentations_per_input < 0:
            raise ValidationError("augmentations_per_input must be >= 0")
        if self.score_mode not in ("mean", "sample"):
            raise ValidationError(f"unknown score_mode {self.score_mode!r}")
        if self.person_policy not in ("highest_confidence", "merged"):
            raise ValidationError(f"unknown person_policy {self.person_policy!r}")
        if self.jobs < 1:
            raise ValidationError("jobs must be >= 1")

    def to_json(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["depth_size"] = list(self.depth_size)
        d["person_classes"] = list(self.person_classes)
        return d

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        if "depth_size" in obj:
            obj["depth_size"] = tuple(obj["depth_size"])
        if "person_classes" in obj:
            obj["person_classes"] = tuple(obj["person_classes"])
        return cls(**obj)


@dataclass(frozen=True)
class GeneratedSample:
    """One emitted image plus its mesh ground truth and provenance."""

    sample_id: str
    source: str  # "text" | "real_image"
    input_id: str
    prompt: str
    gated: bool
    difficulty_score: float
    score_mode: str
    augmentation_index: int
    image: ImageBuffer
    theta: "PoseParams"
    beta: "ShapeParams"
    camera: "WeakPerspectiveCamera"
    seeds: dict
    depth: DepthMap = None
    occluder_mask: np.ndarray = None
    trace: dict = field(default_factory=dict)
    extra_people: tuple = ()
    num_steps: int = 50
    strength: float = 0.8
    source_keypoints: np.ndarray = None  # k x 2 px, real-image mode only


@dataclass(frozen=True)
class RejectedInput:
    input_id: str
    source: str
    reason: str
    prompt: str = ""
    error: bool = False  # True for backend/protocol failures, False for clean drops


def build_prompt(template, category=None, person_phrase=None, **extra):
    """Literal placeholder substitution.

    ``{action}``/``{a}`` take the category, ``{person}``/``{p}`` the person
    phrase; further keyword arguments fill any other placeholder. Unknown
    placeholders raise.
    """
    values = dict(extra)
    if category is not None:
        values.setdefault("action", category)
        values.setdefault("a", category)
    if person_phrase is not None:
        values.setdefault("person", person_phrase)
        values.setdefault("p", person_phrase)
    try:
        return template.format(**values)
    except (KeyError, IndexError) as exc:
        raise ValidationError(
            f"prompt template {template!r} references unknown placeholder {exc}"
        ) from exc


def derive_seed(master, purpose, input_index, aug_index=0):
    """Stable per-task seed, independent of scheduling order."""
    seq = np.random.SeedSequence(
        [int(master), int(purpose), int(input_index), int(aug_index)]
    )
    return int(seq.generate_state(1, np.uint64)[0])


class Pipeline:
    """Binds a backend, a body model, and a pose prior to a config."""

    def __init__(self, cfg, backend, body, vae):
        if vae.body_joint_count != body.joint_count - 1:
            raise ShapeError(
                f"pose prior covers {vae.body_joint_count} body joints, "
                f"body model has {body.joint_count - 1}"
            )
        self.cfg = cfg
        self.backend = backend
        self.body = body
        self.vae = vae

    # ------------------------------------------------------------ inputs

    def generate_from_text(self, prompt, input_index=0):
        """Run the full three-step flow for one text prompt."""
        if not prompt:
            raise ValidationError("prompt must be nonempty")
        cfg = self.cfg
        input_id = f"t{input_index:05d}"
        seed = derive_seed(cfg.seed, _SEED_TXT2IMG, input_index)
        req = GenerationRequest(prompt, seed, cfg.num_steps, cfg.strength)
        image = self.backend.txt2img(req)
        return self._process(image, prompt, "text", input_id, input_index,
                             seeds={"txt2img": seed})

    def generate_from_real(self, image_path, input_index=0, gt_keypoints=None):
        """Real-image guidance: skip text-to-image, start from a photo.

        ``gt_keypoints`` (k x 2 pixels, optional) are the source photo's
        annotated 2-D joints; they ride along into the emitted records so
        downstream finetuning can pair them with the synthetic samples.
        """
        cfg = self.cfg
        input_id = f"r{input_index:05d}"
        try:
            pil = Image.open(image_path).convert("RGB")
        except (OSError, ValueError) as exc:
            raise ValidationError(f"unreadable image {image_path!r}: {exc}") from exc
        image = ImageBuffer(pil.width, pil.height, pil.tobytes())
        prompt = build_prompt(cfg.prompt_template, cfg.category or None,
                              cfg.person_phrase or None)
        return self._process(image, prompt, "real_image", input_id, input_index,
                             seeds={"txt2img": None},
                             source_keypoints=gt_keypoints)

    # ------------------------------------------------------------- guts

    def _select_person(self, people):
        order = sorted(range(len(people)), key=lambda i: people[i].confidence,
                       reverse=True)
        chosen = people[order[0]]
        extras = ()
        if self.cfg.person_policy == "merged":
            extras = tuple(people[i] for i in order[1:])
        return chosen, extras

    def _occluder_mask(self, image):
        """Union of non-person masks, resampled onto the depth grid."""
        cfg = self.cfg
        instances = self.backend.segment(image)
        masks = [
            MaskImage(decode_rle(inst.mask_rle), inst.class_label)
            for inst in instances
        ]
        masks = filter_occluders(masks, set(cfg.person_classes))
        resampled = [
            MaskImage(resample_mask(m.data, cfg.depth_size), m.class_label)
            for m in masks
        ]
        return union_masks(resampled, size=cfg.depth_size)

    def _render_person_depth(self, theta, beta, camera, extras):
        mesh = forward(self.body, theta, beta)
        d = render_depth(mesh, camera, self.cfg.depth_size)
        for person in extras:
            other = forward(self.body, person.theta, person.beta)
            d = merge_depth(d, render_depth(other, person.camera,
                                            self.cfg.depth_size))
        return d

    def _process(self, image, prompt, source, input_id, input_index,
                 seeds, source_keypoints=None):
        cfg = self.cfg
        people = self.backend.hmr(image)
        if not people:
            return [], [RejectedInput(input_id, source,
                                      "no person detected", prompt)]
        person, extras = self._select_person(people)
        self._check_dims(person)

        score_rng = None
        if cfg.score_mode == "sample":
            score_rng = np.random.default_rng(
                derive_seed(cfg.seed, _SEED_SCORE, input_index)
            )
        score = difficulty_score(self.vae, person.theta, score_rng)
        gated = is_hard_pose(score, cfg.tau)

        kp = None
        if source_keypoints is not None:
            kp = np.asarray(source_keypoints, dtype=np.float64).reshape(-1, 2)
        common = dict(
            source=source, input_id=input_id, prompt=prompt,
            difficulty_score=score, score_mode=cfg.score_mode,
            num_steps=cfg.num_steps, strength=cfg.strength,
            source_keypoints=kp,
        )

        if not gated:
            if not cfg.emit_ungated:
                return [], [RejectedInput(input_id, source,
                                          "easy pose and ungated emission "
                                          "is disabled", prompt)]
            sample = GeneratedSample(
                sample_id=f"{input_id}-a0", gated=False, augmentation_index=0,
                image=image, theta=person.theta, beta=person.beta,
                camera=person.camera,
                seeds={**seeds, "depth2img": None, "augment": None},
                extra_people=tuple(person_to_json(p) for p in extras),
                **common,
            )
            return [sample], []

        latents = self.backend.encode_latents(image)
        occluders = self._occluder_mask(image)

        variants = []
        if cfg.augmentations_per_input == 0:
            variants.append((0, person.theta, None))
        else:
            for j in range(1, cfg.augmentations_per_input + 1):
                aug_seed = derive_seed(cfg.seed, _SEED_AUGMENT, input_index, j)
                rng = np.random.default_rng(aug_seed)
                theta_aug = augment_pose(
                    self.vae, person.theta,
                    AugmentationConfig(cfg.aug_scale, cfg.epsilon_range),
                    rng, deterministic_mean=(cfg.score_mode == "mean"),
                )
                variants.append((j, theta_aug, aug_seed))

        samples, rejects = [], []
        for aug_index, theta, aug_seed in variants:
            sid = f"{input_id}-a{aug_index}"
            d_fg = self._render_person_depth(theta, person.beta,
                                             person.camera, extras)
            d_star = apply_occlusion(d_fg, occluders)
            d_norm, empty = normalize_for_conditioning(d_star)
            if empty:
                rejects.append(RejectedInput(
                    sid, source, "conditioning depth is empty "
                    "(mesh projects outside the frame or fully occluded)",
                    prompt))
                continue
            d2i_seed = derive_seed(cfg.seed, _SEED_DEPTH2IMG,
                                   input_index, aug_index)
            req = GenerationRequest(prompt, d2i_seed, cfg.num_steps,
                                    cfg.strength)
            final_img, trace = self.backend.depth2img(latents, d_norm, req)
            samples.append(GeneratedSample(
                sample_id=sid, gated=True, augmentation_index=aug_index,
                image=final_img, theta=theta, beta=person.beta,
                camera=person.camera, depth=d_star,
                occluder_mask=occluders.data,
                seeds={**seeds, "depth2img": d2i_seed, "augment": aug_seed},
                trace=dict(trace),
                extra_people=tuple(person_to_json(p) for p in extras),
                **common,
            ))
        return samples, rejects

    def _check_dims(self, person):
        if person.theta.body_pose.shape[0] != self.body.joint_count - 1:
            raise ProtocolError(
                f"backend pose covers {person.theta.body_pose.shape[0]} body "
                f"joints, body model expects {self.body.joint_count - 1}"
            )
        if person.beta.betas.shape[0] != self.body.shape_basis_size:
            raise ProtocolError(
                f"backend returned {person.beta.betas.shape[0]} betas, "
                f"body model expects {self.body.shape_basis_size}"
            )


def merge_depth(a, b):
    """Combine two depth maps, keeping the nearer foreground value."""
    da = np.where(a.data > 0, a.data, np.inf)
    db = np.where(b.data > 0, b.data, np.inf)
    merged = np.minimum(da, db)
    return DepthMap(np.where(np.isinf(merged), 0.0, merged))


def run_pipeline(pipe, text_prompts=(), real_images=()):
    """Process all inputs (concurrently) in deterministic input order.

    Returns ``(samples, rejects)``; backend failures reject the offending
    input but never abort the batch.
    """
    tasks = [("text", p) for p in text_prompts]
    tasks += [("real", p) for p in real_images]

    def one(args):
        index, (kind, payload) = args
        try:
            if kind == "text":
                return pipe.generate_from_text(payload, index)
            return pipe.generate_from_real(payload, index)
        except (BackendError, ProtocolError, ValidationError) as exc:
            input_id = f"{'t' if kind == 'text' else 'r'}{index:05d}"
            prompt = payload if kind == "text" else ""
            source = "text" if kind == "text" else "real_image"
            return [], [RejectedInput(input_id, source, str(exc), prompt,
                                      error=True)]

    jobs = max(1, min(pipe.cfg.jobs, len(tasks) or 1))
    if jobs == 1:
        results = [one(t) for t in enumerate(tasks)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, enumerate(tasks)))

    samples, rejects = [], []
    for s, r in results:
        samples.extend(s)
        rejects.extend(r)
    return samples, rejects


# ---------------------------------------------------------------- output

def sample_record(sample, image_path, depth_path):
    """Schema-versioned JSON record for one sample (paths relative to the
    dataset root so re-runs into different directories match byte-exactly).
    """
    rec = {
        "schema_version": SCHEMA_VERSION,
        "sample_id": sample.sample_id,
        "source": sample.source,
        "input_id": sample.input_id,
        "prompt": sample.prompt,
        "gated": sample.gated,
        "difficulty_score": float(sample.difficulty_score),
        "score_mode": sample.score_mode,
        "augmentation_index": sample.augmentation_index,
        "image_path": image_path,
        "image_sha256": sample.image.sha256(),
        "depth_path": depth_path,
        "depth_size": None if sample.depth is None
        else [sample.depth.width, sample.depth.height],
        "occluder_mask_rle": None if sample.occluder_mask is None
        else encode_rle(sample.occluder_mask),
        "body_pose": [float(v) for v in sample.theta.body_pose.reshape(-1)],
        "global_orient": [float(v) for v in sample.theta.global_orient],
        "betas": [float(v) for v in sample.beta.betas],
        "camera": sample.camera.to_dict(),
        "extra_people": list(sample.extra_people),
        "source_keypoints_2d": None if sample.source_keypoints is None
        else [[float(x), float(y)] for x, y in sample.source_keypoints],
        "seeds": sample.seeds,
        "num_steps": sample.num_steps,
        "strength": sample.strength,
        "trace": sample.trace or {},
    }
    return rec


def emit_dataset(samples, out_dir, cfg=None, rejects=()):
    """Write images, depth maps, annotations.jsonl, rejects.jsonl, and a
    manifest with the config snapshot. Returns the manifest path.
    """
    seen = set()
    for s in samples:
        if s.sample_id in seen:
            raise ValidationError(f"duplicate sample id {s.sample_id!r}")
        seen.add(s.sample_id)

    images_dir = os.path.join(out_dir, "images")
    depths_dir = os.path.join(out_dir, "depths")
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(depths_dir, exist_ok=True)

    ann_path = os.path.join(out_dir, "annotations.jsonl")
    with open(ann_path, "w") as fh:
        for s in samples:
            image_rel = f"images/{s.sample_id}.png"
            with open(os.path.join(out_dir, image_rel), "wb") as img_fh:
                img_fh.write(encode_png(s.image))
            depth_rel = None
            if s.depth is not None:
                depth_rel = f"depths/{s.sample_id}.bin"
                write_depth(os.path.join(out_dir, depth_rel), s.depth)
            rec = sample_record(s, image_rel, depth_rel)
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")

    with open(os.path.join(out_dir, "rejects.jsonl"), "w") as fh:
        for r in rejects:
            fh.write(json.dumps({
                "input_id": r.input_id, "source": r.source,
                "reason": r.reason, "prompt": r.prompt, "error": r.error,
            }, sort_keys=True, separators=(",", ":")) + "\n")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "generator": {"name": "posesynth", "version": __version__},
        "config": None if cfg is None else cfg.to_json(),
        "counts": {
            "samples": len(samples),
            "gated": sum(1 for s in samples if s.gated),
            "ungated": sum(1 for s in samples if not s.gated),
            "rejected": len(rejects),
        },
        "files": {"annotations": "annotations.jsonl",
                  "rejects": "rejects.jsonl"},
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_annotations(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def rerender_record_depth(record, body):
    """Recompute the stored depth map from a record's ground truth.

    The bit-exactness of this round trip against the stored .bin file is
    the pipeline's central self-check.
    """
    from .body_model import PoseParams, ShapeParams
    from .camera import WeakPerspectiveCamera

    theta = PoseParams(np.array(record["body_pose"]).reshape(-1, 3),
                       np.array(record["global_orient"]))
    beta = ShapeParams(np.array(record["betas"]))
    cam = WeakPerspectiveCamera.from_dict(record["camera"])
    size = tuple(record["depth_size"])
    mesh = forward(body, theta, beta)
    d = render_depth(mesh, cam, size)
    for extra in record.get("extra_people", []):
        person = person_from_json(extra)
        other = forward(body, person.theta, person.beta)
        d = merge_depth(d, render_depth(other, person.camera, size))
    mask = MaskImage(decode_rle(record["occluder_mask_rle"]))
    return apply_occlusion(d, mask)
