import json
import pathlib

import numpy as np
import pytest

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures():
    return FIXTURES


@pytest.fixture(scope="session")
def tiny_net():
    from hzreach import load_model

    return load_model(str(FIXTURES / "tiny.json"))


@pytest.fixture(scope="session")
def tiny_box():
    from hzreach import Interval

    data = json.loads((FIXTURES / "tiny_box.json").read_text())
    return Interval(np.asarray(data["lo"]), np.asarray(data["hi"]))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
