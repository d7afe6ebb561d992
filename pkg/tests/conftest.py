import pytest

from captl.casestudies import MedaParams, RobotParams, gen_meda, gen_robot
from captl.model import parse_model
from captl.requirement import parse_requirement


@pytest.fixture(scope="session")
def robot3():
    model_text, req_text = gen_robot(RobotParams(width=3, height=3))
    return parse_model(model_text), parse_requirement(req_text)


@pytest.fixture(scope="session")
def meda85():
    model_text, req_text = gen_meda(MedaParams(width=8, height=5))
    return parse_model(model_text), parse_requirement(req_text)
