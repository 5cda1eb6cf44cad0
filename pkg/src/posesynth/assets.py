"""Paths to the packaged toy assets."""

from importlib import resources


def _asset(name):
    return resources.files("posesynth") / "assets" / name


def toy_body_model_path():
    return str(_asset("toy_body_model.zip"))


def toy_pose_prior_path():
    return str(_asset("toy_pose_prior.zip"))


def fixture_photo_path():
    return str(_asset("fixture_photo.png"))


def toy_zero_pose_depth_path():
    return str(_asset("fixtures") / "toy_zero_pose_depth.bin")
