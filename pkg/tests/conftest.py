import numpy as np
import pytest

from beastal.graph import build_topology


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def chain():
    """One input, one output, ground: edges in->out, out->gnd."""
    return build_topology(1, 1)
