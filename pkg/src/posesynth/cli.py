"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Defaults mirror
the documented pipeline values (tau 30, 3 augmentations, 50 steps, 64x64
depth).
"""

import json
import sys

import click
import numpy as np

from . import assets
from .body_model import (Joints3D, PoseParams, ShapeParams, forward,
                         load_body_model)
from .camera import WeakPerspectiveCamera
from .client import ENV_BACKEND_URL, get_backend
from .depthmap import write_depth, write_depth_png
from .errors import PoseSynthError, ValidationError
from .metrics import (Keypoints2D, mpjpe, pa_mpjpe, pck, torso_threshold,
                      write_report)
from .mock_backend import MockBackend
from .pipeline import Pipeline, PipelineConfig, emit_dataset, run_pipeline
from .pose_prior import difficulty_score, is_hard_pose, load_pose_prior
from .raster import render_depth
from .serve import make_server


def _nonnegative(ctx, param, value):
    if value is not None and value < 0:
        raise click.BadParameter(f"{param.name} must be >= 0")
    return value


def _positive(ctx, param, value):
    if value is not None and value <= 0:
        raise click.BadParameter(f"{param.name} must be > 0")
    return value


def _strength_range(ctx, param, value):
    if value is not None and not (0.0 < value <= 1.0):
        raise click.BadParameter("strength must be in (0, 1]")
    return value


def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read {what} file {path!r}: {exc}")


def _pose_from_file(path):
    obj = _read_json(path, "pose")
    try:
        return PoseParams(
            np.asarray(obj["body_pose"], dtype=np.float64).reshape(-1, 3),
            np.asarray(obj.get("global_orient", [0.0, 0.0, 0.0]),
                       dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError, PoseSynthError) as exc:
        raise click.UsageError(f"malformed pose file {path!r}: {exc}")


@click.group()
def main():
    """Synthetic posed-human data generation and evaluation."""


@main.command()
@click.option("--prompt", "prompts", multiple=True, help="Text prompt (repeatable).")
@click.option("--prompt-file", type=click.Path(exists=True, dir_okay=False),
              help="File with one prompt per line.")
@click.option("--real-dir", type=click.Path(exists=True, file_okay=False),
              help="Directory of guidance photos (png/jpg).")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output dataset directory.")
@click.option("--backend", default=None,
              help=f"'mock' or backend base URL (default: ${ENV_BACKEND_URL}).")
@click.option("--model", "model_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Body-model container (default: packaged toy model).")
@click.option("--vae", "vae_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Pose-prior checkpoint (default: packaged toy checkpoint).")
@click.option("--tau", default=30.0, show_default=True, callback=_nonnegative,
              help="Difficulty gate threshold.")
@click.option("--augs", default=3, show_default=True, callback=_nonnegative,
              help="Pose augmentations per hard input.")
@click.option("--aug-scale", default=0.1, show_default=True, callback=_nonnegative,
              help="Latent perturbation scale s.")
@click.option("--strength", default=0.8, show_default=True,
              callback=_strength_range,
              help="Latent noise strength in (0, 1].")
@click.option("--steps", default=50, show_default=True, callback=_positive,
              help="Diffusion inference steps.")
@click.option("--seed", default=0, show_default=True, callback=_nonnegative)
@click.option("--depth-size", default=64, show_default=True, callback=_positive,
              help="Depth raster size (square).")
@click.option("--score-mode", type=click.Choice(["mean", "sample"]),
              default="mean", show_default=True)
@click.option("--person-policy", type=click.Choice(["highest_confidence", "merged"]),
              default="highest_confidence", show_default=True)
@click.option("--emit-ungated/--no-emit-ungated", default=True, show_default=True,
              help="Emit easy (ungated) samples with HMR pseudo ground truth.")
@click.option("--jobs", default=4, show_default=True, callback=_positive,
              help="Concurrent in-flight inputs.")
@click.option("--template", default="a photo of a person", show_default=True,
              help="Prompt template for real-image mode.")
@click.option("--category", default="", help="Fills {action} in the template.")
@click.option("--person-phrase", default="", help="Fills {person} in the template.")
@click.option("--allow-empty", is_flag=True,
              help="Exit 0 even when no samples were emitted (but no failures).")
def generate(prompts, prompt_file, real_dir, out, backend, model_path, vae_path,
             tau, augs, aug_scale, strength, steps, seed, depth_size,
             score_mode, person_policy, emit_ungated, jobs, template,
             category, person_phrase, allow_empty):
    """Generate a synthetic dataset with mesh ground truth."""
    import os

    text_prompts = list(prompts)
    if prompt_file:
        with open(prompt_file) as fh:
            text_prompts += [ln.strip() for ln in fh if ln.strip()]
    real_images = []
    if real_dir:
        real_images = sorted(
            os.path.join(real_dir, f) for f in os.listdir(real_dir)
            if f.lower().endswith((".png", ".jpg", ".jpeg"))
        )
    if not text_prompts and not real_images:
        raise click.UsageError(
            "nothing to generate: pass --prompt, --prompt-file, or --real-dir"
        )

    try:
        cfg = PipelineConfig(
            tau=tau, augmentations_per_input=augs, aug_scale=aug_scale,
            depth_size=(depth_size, depth_size), strength=strength,
            num_steps=steps, seed=seed, score_mode=score_mode,
            person_policy=person_policy, emit_ungated=emit_ungated,
            jobs=jobs, prompt_template=template, category=category,
            person_phrase=person_phrase,
        )
    except ValidationError as exc:
        raise click.UsageError(str(exc))

    try:
        body = load_body_model(model_path or assets.toy_body_model_path())
        vae = load_pose_prior(vae_path or assets.toy_pose_prior_path())
        bk = get_backend(backend)
        pipe = Pipeline(cfg, bk, body, vae)
        samples, rejects = run_pipeline(pipe, text_prompts, real_images)
        os.makedirs(out, exist_ok=True)
        manifest = emit_dataset(samples, out, cfg, rejects)
    except PoseSynthError as exc:
        raise click.ClickException(str(exc))

    gated = sum(1 for s in samples if s.gated)
    total_inputs = len(text_prompts) + len(real_images)
    click.echo(f"inputs: {total_inputs}  emitted: {len(samples)} "
               f"(gated {gated}, ungated {len(samples) - gated})  "
               f"rejected: {len(rejects)}")
    if total_inputs:
        click.echo(f"gate rate: {gated_inputs_rate(samples, rejects):.2f}")
    click.echo(f"manifest: {manifest}")
    for r in rejects:
        click.echo(f"  dropped {r.input_id}: {r.reason}", err=True)

    if samples:
        return
    failures = [r for r in rejects if r.error]
    if allow_empty and not failures:
        return
    raise click.ClickException("no samples were emitted")


def gated_inputs_rate(samples, rejects):
    gated_inputs = {s.input_id for s in samples if s.gated}
    seen_inputs = {s.input_id for s in samples} | {r.input_id for r in rejects}
    return len(gated_inputs) / max(1, len(seen_inputs))


@main.command("score-pose")
@click.option("--vae", "vae_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pose", "pose_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", default=30.0, show_default=True, callback=_nonnegative)
@click.option("--mean/--sample", "mean_mode", default=True,
              help="Deterministic-mean scoring vs sampled embedding.")
@click.option("--seed", default=0, show_default=True, callback=_nonnegative,
              help="RNG seed for --sample mode.")
def score_pose(vae_path, pose_path, tau, mean_mode, seed):
    """Score a pose's difficulty and print the gate verdict."""
    vae = load_pose_prior(vae_path or assets.toy_pose_prior_path())
    pose = _pose_from_file(pose_path)
    rng = None if mean_mode else np.random.default_rng(seed)
    try:
        score = difficulty_score(vae, pose, rng)
    except PoseSynthError as exc:
        raise click.ClickException(str(exc))
    verdict = "hard" if is_hard_pose(score, tau) else "easy"
    click.echo(f"score={score:.6f} tau={tau} verdict={verdict}")


@main.command("render-depth")
@click.option("--model", "model_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pose", "pose_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--shape", "shape_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--cam", "cam_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--size", default=64, show_default=True, callback=_positive)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output file; .bin for binary, .png for 16-bit PNG.")
def render_depth_cmd(model_path, pose_path, shape_path, cam_path, size, out):
    """Render a posed body's depth map to a file."""
    try:
        body = load_body_model(model_path or assets.toy_body_model_path())
        pose = _pose_from_file(pose_path)
        if shape_path:
            shape = ShapeParams(np.asarray(
                _read_json(shape_path, "shape")["betas"], dtype=np.float64))
        else:
            shape = ShapeParams.zeros(body.shape_basis_size)
        if cam_path:
            cam = WeakPerspectiveCamera.from_dict(_read_json(cam_path, "camera"))
        else:
            cam = WeakPerspectiveCamera(0.9, 0.0, 0.0, size, size)
        depth = render_depth(forward(body, pose, shape), cam, (size, size))
        if out.endswith(".png"):
            write_depth_png(out, depth)
        else:
            write_depth(out, depth)
    except PoseSynthError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {out} ({size}x{size}, "
               f"{int(depth.foreground().sum())} foreground px)")


@main.command()
@click.option("--pred", "pred_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pck-thresh", default=None, type=float, callback=_positive,
              help="Fixed PCK threshold in pixels (else torso-based).")
@click.option("--joints", "joints_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON with joint 'subset' and optional 'torso' indices.")
@click.option("--out", default="evaluation_report.jsonl", show_default=True,
              type=click.Path(dir_okay=False))
@click.option("--root-align/--no-root-align", default=True, show_default=True)
def evaluate(pred_path, gt_path, pck_thresh, joints_path, out, root_align):
    """Compare prediction and ground-truth JSONL files; write a report."""
    preds = {r["sample_id"]: r for r in _read_jsonl(pred_path)}
    gts = {r["sample_id"]: r for r in _read_jsonl(gt_path)}
    missing = sorted(set(gts) ^ set(preds))
    if missing:
        click.echo("sample ids do not match; offending ids:", err=True)
        for sid in missing:
            click.echo(f"  {sid}", err=True)
        sys.exit(1)

    subset = torso = None
    if joints_path:
        cfg = _read_json(joints_path, "joint subset")
        subset = cfg.get("subset")
        torso = cfg.get("torso")

    records, m3d, mpa, mpck = [], [], [], []
    for sid in sorted(gts):
        g, p = gts[sid], preds[sid]
        rec = {"sample_id": sid}
        if "joints3d" in g and "joints3d" in p:
            gj = np.asarray(g["joints3d"], dtype=np.float64)
            pj = np.asarray(p["joints3d"], dtype=np.float64)
            if subset:
                gj, pj = gj[subset], pj[subset]
            rec["mpjpe_mm"] = mpjpe(Joints3D(pj), Joints3D(gj), root_align)
            rec["pa_mpjpe_mm"] = pa_mpjpe(Joints3D(pj), Joints3D(gj))
            m3d.append(rec["mpjpe_mm"])
            mpa.append(rec["pa_mpjpe_mm"])
        if "keypoints2d" in g and "keypoints2d" in p:
            gk = np.asarray(g["keypoints2d"], dtype=np.float64)
            pk = np.asarray(p["keypoints2d"], dtype=np.float64)
            vis = np.asarray(g.get("visibility", [True] * len(gk)), dtype=bool)
            if subset:
                gk, pk, vis = gk[subset], pk[subset], vis[subset]
            if pck_thresh is not None:
                thresh = pck_thresh
            elif torso:
                thresh = torso_threshold(gk, torso)
            else:
                raise click.UsageError(
                    "2-D evaluation needs --pck-thresh or torso indices "
                    "in --joints"
                )
            rec["threshold_px"] = thresh
            rec["pck"] = pck(Keypoints2D(pk, vis), Keypoints2D(gk, vis), thresh)
            mpck.append(rec["pck"])
        records.append(rec)

    summary = {"samples": len(records)}
    if m3d:
        summary["mpjpe_mm"] = float(np.mean(m3d))
        summary["pa_mpjpe_mm"] = float(np.mean(mpa))
        summary["root_align"] = root_align
    if mpck:
        summary["pck"] = float(np.mean(mpck))
    write_report(out, records, summary)
    click.echo(json.dumps(summary, sort_keys=True))


def _read_jsonl(path):
    with open(path) as fh:
        try:
            return [json.loads(line) for line in fh if line.strip()]
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"{path!r} is not valid JSONL: {exc}")


@main.command("serve-mock")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True)
@click.option("--image-size", default=512, show_default=True, callback=_positive)
@click.option("--joints", default=2, show_default=True, callback=_positive,
              help="Body joints in mock HMR poses.")
@click.option("--betas", default=2, show_default=True, callback=_positive,
              help="Shape coefficients in mock HMR responses.")
@click.option("--canned-hmr", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON mapping image sha256 -> canned people list.")
def serve_mock(host, port, image_size, joints, betas, canned_hmr):
    """Serve the deterministic mock backend over HTTP."""
    canned = _read_json(canned_hmr, "canned HMR") if canned_hmr else None
    try:
        backend = MockBackend(image_size=image_size, n_body_joints=joints,
                              n_betas=betas, canned_hmr=canned)
        server = make_server(backend, host, port)
    except PoseSynthError as exc:
        raise click.ClickException(str(exc))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}")
    click.echo(f"mock backend listening on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        click.echo("shutting down")
    finally:
        server.server_close()


if __name__ == "__main__":
    main()
