"""Backend service exposing generative/perception models over the
posesynth wire protocol (see the pipeline repo's docs/api.md)."""

__version__ = "0.1.0"
