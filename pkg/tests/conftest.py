import numpy as np
import pytest

from posesynth import assets
from posesynth.body_model import (BodyModelSpec, Mesh, PoseParams, ShapeParams,
                                  load_body_model)
from posesynth.pose_prior import load_pose_prior


@pytest.fixture(scope="session")
def toy_body():
    return load_body_model(assets.toy_body_model_path())


@pytest.fixture(scope="session")
def toy_vae():
    return load_pose_prior(assets.toy_pose_prior_path())


@pytest.fixture
def two_joint_model():
    """Hand-analyzable chain: root at origin, child at (1,0,0).

    Vertices: two around the root (regressed as their mean), one at the
    child joint, one at child + (1,0,0) bound rigidly to the child.
    """
    verts = np.array([
        [0.0, 0.0, 0.1],
        [0.0, 0.0, -0.1],
        [2.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
    ])
    regressor = np.array([
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    weights = np.array([
        [1.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [0.0, 1.0],
    ])
    return BodyModelSpec(
        template_vertices=verts,
        shape_dirs=np.zeros((4, 3, 1)),
        pose_dirs=np.zeros((4, 3, 0)),
        joint_regressor=regressor,
        skinning_weights=weights,
        parent=np.array([-1, 0], dtype=np.int64),
        faces=np.array([[0, 1, 2], [0, 1, 3]], dtype=np.int64),
    ).validate()


def random_joints(rng, n=24, spread=0.5):
    from posesynth.body_model import Joints3D

    return Joints3D(rng.normal(0.0, spread, size=(n, 3)))


def make_pose(body_pose, global_orient=(0.0, 0.0, 0.0)):
    return PoseParams(np.asarray(body_pose, dtype=np.float64).reshape(-1, 3),
                      np.asarray(global_orient, dtype=np.float64))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in str(getattr(report, "nodeid", "")):
                continue
            item_name = report.nodeid.split("::")[-1]
            try:
                import test_acceptance

                fn = getattr(test_acceptance, item_name.split("[")[0], None)
                label = getattr(fn, "_criterion", item_name)
            except Exception:
                label = item_name
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append(f"ACCEPTANCE {status}: {label}")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
