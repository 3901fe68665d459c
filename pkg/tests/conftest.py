import hypothesis
import numpy as np
import pytest

from graspr.geometry import RigidTransform
from graspr.hand import HandPose, default_skeleton

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def skeleton():
    return default_skeleton()


@pytest.fixture(scope="session")
def rest_pose(skeleton):
    return HandPose(skeleton, RigidTransform.identity(), np.zeros(skeleton.dof))


def random_valid_pose(skeleton, rng, wrist_rotated=False):
    lo, hi = skeleton.rom_lo(), skeleton.rom_hi()
    angles = rng.uniform(lo, hi)
    wrist = RigidTransform.identity()
    if wrist_rotated:
        axis = rng.normal(size=3)
        wrist = RigidTransform.from_axis_angle(axis, rng.uniform(0, np.pi),
                                               rng.normal(size=3) * 0.1)
    return HandPose(skeleton, wrist, angles)
