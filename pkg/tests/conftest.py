import os

import pytest

from borelsum import checks, model

DATA = checks.DATA


@pytest.fixture(scope="session")
def euler():
    return checks.pipeline("euler", checks.N_DESK)


@pytest.fixture(scope="session")
def nonlinear():
    return checks.pipeline("nonlinear")


@pytest.fixture
def spec_path():
    return lambda name: os.path.join(DATA, f"{name}.json")
