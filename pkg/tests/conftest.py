import numpy as np
import pytest

from armid.model import (
    JointSpec,
    RobotModel,
    Transform,
    params_from_com,
)


@pytest.fixture
def pendulum_model() -> RobotModel:
    """1-link pendulum: joint at origin, axis y, CoM 0.5 m below, m = 1."""
    joint = JointSpec(
        name="swing",
        axis=np.array([0.0, 1.0, 0.0]),
        parent_frame_pose=Transform.identity(),
        position_limits=(-3.0, 3.0),
        velocity_limit=2.5,
        acceleration_limit=15.0,
    )
    params = params_from_com(1.0, [0.0, 0.0, -0.5], np.diag([0.1, 0.1, 0.01]))
    return RobotModel(links=((joint, params),), name="pendulum")


@pytest.fixture
def twolink_model() -> RobotModel:
    """2-link chain with mixed axes and nonzero friction everywhere."""
    j1 = JointSpec(
        name="a",
        axis=np.array([0.0, 0.0, 1.0]),
        parent_frame_pose=Transform.from_xyz_rpy([0, 0, 0.3], [0, 0, 0]),
        position_limits=(-2.9, 2.9),
        velocity_limit=1.7,
        acceleration_limit=10.0,
    )
    j2 = JointSpec(
        name="b",
        axis=np.array([0.0, 1.0, 0.0]),
        parent_frame_pose=Transform.from_xyz_rpy([0.1, 0, 0.2], [0.3, -0.2, 0.1]),
        position_limits=(-2.9, 2.9),
        velocity_limit=1.7,
        acceleration_limit=10.0,
    )
    p1 = params_from_com(2.0, [0.05, 0.02, -0.1], np.diag([0.02, 0.03, 0.015]), 0.1, 0.2, 1e-4)
    p2 = params_from_com(1.0, [0.1, 0.0, 0.05], np.diag([0.01, 0.012, 0.006]), 0.05, 0.1, 2e-4)
    return RobotModel(links=((j1, p1), (j2, p2)), name="twolink")
