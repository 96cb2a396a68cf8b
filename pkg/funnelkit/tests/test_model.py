import json

import pytest
import torch

from funnelkit import infotheory
from funnelkit.model import (
    ComponentModel,
    DataModel,
    TaskSpec,
    check_feasibility,
    joint_pmf,
    load_model,
    model_to_dict,
    save_model,
    scaled,
    with_gammas,
)
from funnelkit.oracle import random_component
from funnelkit.types import InfeasibleModelError, ModelError
from funnelkit.utils import seeded


def test_parity_model_file(parity_model):
    assert parity_model.n_components == 2
    assert len(parity_model.tasks) == 2
    assert parity_model.gammas == [1.5, 2.5]
    for comp in parity_model.components:
        assert comp.h_x == pytest.approx(2.0, abs=1e-12)
        assert comp.h_s == pytest.approx(1.0, abs=1e-12)


def test_component_validation():
    with pytest.raises(ModelError):
        ComponentModel(("0", "1"), [0.5, 0.6], (0, 1), ("0", "1"))
    with pytest.raises(ModelError):
        ComponentModel(("0", "1"), [0.5, 0.5], (0,), ("0",))
    with pytest.raises(ModelError):
        ComponentModel(("0", "1"), [0.5, 0.5], (0, 2), ("0", "1"))
    # private alphabet larger than the image of the map
    with pytest.raises(ModelError):
        ComponentModel(("0", "1"), [0.5, 0.5], (0, 0), ("0", "1"))
    with pytest.raises(ModelError):
        ComponentModel(("0", "1", "2"), [0.5, 0.5], (0, 0), ("0",))


def test_task_validation(binary_component):
    with pytest.raises(ModelError):
        TaskSpec((), gamma_bits=0.1)
    with pytest.raises(ModelError):
        TaskSpec((0,))
    with pytest.raises(ModelError):
        TaskSpec((0,), gamma_bits=0.1, distortion_bits=0.1)
    with pytest.raises(ModelError):
        DataModel([binary_component], [TaskSpec((1,), gamma_bits=0.1)])
    assert TaskSpec((2, 0, 2), gamma_bits=1.0).components == (0, 2)


def test_distortion_target(parity_component):
    m = DataModel([parity_component], [TaskSpec((0,), distortion_bits=0.5)])
    assert m.gamma(0) == pytest.approx(1.5)


def test_joint_pmf(binary_component):
    a = ComponentModel(("0", "1"), [0.25, 0.75], (0, 0), ("*",))
    m = DataModel([a, binary_component], [])
    assert torch.allclose(
        joint_pmf(m, [0, 1]), torch.tensor([0.125, 0.125, 0.375, 0.375], dtype=torch.float64)
    )
    assert torch.equal(joint_pmf(m, [0]), a.pmf)
    u = DataModel([binary_component, binary_component], [])
    assert torch.allclose(joint_pmf(u, [0, 1]), torch.full((4,), 0.25, dtype=torch.float64))
    with pytest.raises(ModelError):
        joint_pmf(m, [])
    with pytest.raises(ModelError):
        joint_pmf(m, [2])


@pytest.mark.parametrize("seed", range(5))
def test_joint_entropy_is_additive(seed):
    with seeded(seed):
        comps = [random_component(4) for _ in range(3)]
    m = DataModel(comps, [])
    assert infotheory.entropy(joint_pmf(m, range(3))) == pytest.approx(sum(c.h_x for c in comps), abs=1e-9)
    assert infotheory.entropy(joint_pmf(m, [2, 0])) == pytest.approx(comps[0].h_x + comps[2].h_x, abs=1e-9)


def test_private_index(parity_model):
    labels = parity_model.alphabet.labels
    assert labels[0] == "0,0" and labels[-1] == "3,3"
    index = parity_model.private_index()
    # x = (3, 2) -> s = (odd, even)
    assert parity_model.private_alphabet.labels[int(index[labels.index("3,2")])] == "odd,even"


def test_roundtrip_is_exact(tmp_path, skewed_component):
    m = DataModel([skewed_component], [TaskSpec((0,), gamma_bits=0.7)])
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert torch.equal(back.components[0].pmf, m.components[0].pmf)
    assert model_to_dict(back) == model_to_dict(m)


def test_infeasible_target(tmp_path):
    spec = {
        "components": [
            {"alphabet": ["0", "1"], "pmf": [0.5, 0.5], "private_map": [0, 1], "private_alphabet": ["0", "1"]}
        ],
        "tasks": [{"components": [0], "gamma_bits": 3.0}],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    with pytest.raises(InfeasibleModelError) as info:
        load_model(path)
    assert info.value.tasks == (0,)
    assert len(load_model(path, check=False).tasks) == 1


def test_malformed_files(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(path)
    path.write_text(json.dumps({"components": [{"alphabet": ["0"]}]}))
    with pytest.raises(ModelError):
        load_model(path)
    path.write_text(
        json.dumps(
            {"components": [{"alphabet": ["0", "1"], "pmf": [0.5, 0.6], "private_map": [0, 1], "private_alphabet": ["0", "1"]}]}
        )
    )
    with pytest.raises(ModelError):
        load_model(path)


def test_derived_models(parity_model):
    assert scaled(parity_model, 2.0).gammas == [3.0, 5.0]
    assert check_feasibility(scaled(parity_model, 2.0)) == [0, 1]
    assert check_feasibility(with_gammas(parity_model, [1.0, 4.5])) == [1]
    assert with_gammas(parity_model, [0.0, 0.0]).gammas == [0.0, 0.0]
    with pytest.raises(ModelError):
        with_gammas(parity_model, [1.0])
