import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ecgnode.power import NodeConfig
from ecgnode.qcnn import load_model
from ecgnode.traceio import synth_trace

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def node_cfg():
    return NodeConfig()

@pytest.fixture(scope="session")
def fixture_model():
    return load_model(FIXTURES / "nlrav_4_4_100.json")


@pytest.fixture(scope="session")
def fixture_model_path():
    return FIXTURES / "nlrav_4_4_100.json"


@pytest.fixture(scope="session")
def always_n_model():
    return load_model(FIXTURES / "always_n_4_4_100.json")


@pytest.fixture(scope="session")
def always_n_model_path():
    return FIXTURES / "always_n_4_4_100.json"


@pytest.fixture(scope="session")
def synth_60bpm():
    return synth_trace(60, 10.0, 330.0, 0.0, seed=7)
