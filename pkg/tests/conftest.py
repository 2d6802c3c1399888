import numpy as np
import pytest

from coadapt.config import default_config
from coadapt.kinematics import RobotModel


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def robot(cfg):
    return RobotModel.from_config(cfg["robot"])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_config(robot, rng, margin=0.4):
    lo = robot.joint_limits[:, 0] * (1 - margin)
    hi = robot.joint_limits[:, 1] * (1 - margin)
    return rng.uniform(lo, hi)
