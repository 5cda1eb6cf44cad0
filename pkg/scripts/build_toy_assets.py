#!/usr/bin/env python3
"""Regenerate the committed toy assets under src/posesynth/assets/.

Deterministic: re-running must reproduce the committed files byte-exactly
(the render-depth CLI fixture depends on it).
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from posesynth import toy, wire  # noqa: E402
from posesynth.body_model import PoseParams, ShapeParams, forward, save_body_model  # noqa: E402
from posesynth.camera import WeakPerspectiveCamera  # noqa: E402
from posesynth.depthmap import write_depth  # noqa: E402
from posesynth.pose_prior import save_pose_prior  # noqa: E402
from posesynth.raster import render_depth  # noqa: E402

ASSETS = os.path.join(os.path.dirname(__file__), "..", "src", "posesynth", "assets")


def main():
    os.makedirs(os.path.join(ASSETS, "fixtures"), exist_ok=True)

    body = toy.build_toy_body_model()
    save_body_model(os.path.join(ASSETS, "toy_body_model.zip"), body)

    vae = toy.build_toy_pose_prior()
    save_pose_prior(os.path.join(ASSETS, "toy_pose_prior.zip"), vae)

    photo = toy.build_fixture_photo()
    with open(os.path.join(ASSETS, "fixture_photo.png"), "wb") as fh:
        fh.write(wire.encode_png(photo))

    # render-depth CLI fixture: toy model, rest pose, default camera
    mesh = forward(body, PoseParams.zeros(body.joint_count),
                   ShapeParams.zeros(body.shape_basis_size))
    cam = WeakPerspectiveCamera(0.9, 0.0, 0.0, 64, 64)
    depth = render_depth(mesh, cam, (64, 64))
    write_depth(os.path.join(ASSETS, "fixtures", "toy_zero_pose_depth.bin"), depth)

    print(f"assets written to {os.path.abspath(ASSETS)}")


if __name__ == "__main__":
    main()
