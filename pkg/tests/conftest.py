import numpy as np
import pytest

from lsmrac.constants import DEFAULT_K1_POSITION, DEFAULT_K1_VELOCITY, DEFAULT_K2
from lsmrac.sim_engine import AdaptationSpec, PlantSpec, ReferenceSpec, RobotScenario, RobotSpec
from lsmrac.system_models import (
    ConstantInput,
    build_reference_from_gains,
    build_robot_plant,
    robot_gains,
)


@pytest.fixture
def robot_plant():
    return build_robot_plant(18.0, 4.0, 0.05)


@pytest.fixture
def robot_reference(robot_plant):
    """(ReferenceModel, MatchingParameters) for the nominal robot gains."""
    K1, K2 = robot_gains(DEFAULT_K1_POSITION, DEFAULT_K1_VELOCITY, DEFAULT_K2)
    return build_reference_from_gains(robot_plant, K1, K2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_head_on(ca_enabled: bool, steps: int = 400):
    """Two robots on the x axis swapping places through the origin."""
    K1, K2 = robot_gains(DEFAULT_K1_POSITION, DEFAULT_K1_VELOCITY, DEFAULT_K2)
    return RobotScenario(
        plant=PlantSpec(),
        reference=ReferenceSpec(K1=K1, K2=K2),
        robots=(
            RobotSpec(x0=(-1.0, 0.0, 0.0, 0.0), reference_input=ConstantInput((-0.1, 0.0))),
            RobotSpec(x0=(1.0, 0.0, 0.0, 0.0), reference_input=ConstantInput((0.1, 0.0))),
        ),
        adaptation=AdaptationSpec(theta0_fraction=1.0),
        ca_enabled=ca_enabled,
        steps=steps,
        name="head-on" + ("" if ca_enabled else "-noca"),
    )


@pytest.fixture
def head_on():
    return make_head_on
