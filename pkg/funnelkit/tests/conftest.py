import pytest
import torch

from funnelkit.model import ComponentModel, DataModel, TaskSpec, load_model, save_model
from funnelkit.types import Channel
from funnelkit.verify import PARITY_MODEL


@pytest.fixture
def parity_component():
    return ComponentModel(("0", "1", "2", "3"), [0.25] * 4, (0, 1, 0, 1), ("even", "odd"))


@pytest.fixture
def binary_component():
    """Uniform bit whose private feature is the bit itself."""
    return ComponentModel(("0", "1"), [0.5, 0.5], (0, 1), ("0", "1"))


@pytest.fixture
def public_component():
    """Uniform bit with a constant private feature."""
    return ComponentModel(("0", "1"), [0.5, 0.5], (0, 0), ("*",))


@pytest.fixture
def skewed_component():
    return ComponentModel(("a", "b", "c"), [0.5, 0.3, 0.2], (0, 0, 1), ("u", "v"))


@pytest.fixture
def parity_model():
    return load_model(PARITY_MODEL)


@pytest.fixture
def parity_model_file(tmp_path, parity_model):
    path = tmp_path / "parity.json"
    save_model(parity_model, path)
    return path


@pytest.fixture
def two_bit_model(binary_component):
    return DataModel(
        [binary_component, binary_component],
        [TaskSpec((0,), gamma_bits=0.5), TaskSpec((0, 1), gamma_bits=1.0)],
    )


def bsc(flip: float) -> Channel:
    rows = torch.tensor([[1 - flip, flip], [flip, 1 - flip]], dtype=torch.float64)
    return Channel(("0", "1"), ("0", "1"), rows)
