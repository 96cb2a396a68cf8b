import pytest
import torch

from funnelkit.channel import constant_channel, evaluate_mechanism, evaluate_product
from funnelkit.model import DataModel, TaskSpec
from funnelkit.oracle import random_channel
from funnelkit.parallelize import (
    _release_channel,
    build_U,
    independence_gap,
    parallelize_compression,
    parallelize_private_prefix,
    parallelize_privatization,
    release_gap,
    remark_instance,
)
from funnelkit.types import Channel
from funnelkit.utils import seeded


def _random_pair(model, n_out, seed):
    with seeded(seed):
        return random_channel(model.alphabet.labels, n_out)


def test_single_component_prefix_follows_private_class(skewed_component):
    model = DataModel([skewed_component], [TaskSpec((0,), gamma_bits=1.0)])
    ch = _random_pair(model, 3, 0)
    (u,) = build_U(model, ch)
    assert u.out_alphabet == ch.out_alphabet
    # one row per private class, shared by its members
    assert torch.allclose(u.rows[0], u.rows[1])
    _, report = parallelize_privatization(model, ch)
    assert report.ok


def test_constant_channel(parity_model):
    ch = constant_channel(parity_model.alphabet.labels)
    product, report = parallelize_privatization(parity_model, ch)
    assert report.ok
    assert report.transformed.leakage_bits == pytest.approx(0.0, abs=1e-12)
    assert len(product.factors) == 2


@pytest.mark.parametrize("seed", range(5))
def test_privatization_keeps_leakage(parity_model, seed):
    ch = _random_pair(parity_model, 3, seed)
    product, report = parallelize_privatization(parity_model, ch)
    assert report.ok
    assert abs(report.deltas["leakage_bits"]) <= 1e-9
    assert all(d >= -1e-9 for d in report.deltas["utility_bits"])
    assert report.independence_gap == pytest.approx(0.0, abs=1e-9)
    assert evaluate_product(parity_model, product).leakage_bits == pytest.approx(
        evaluate_mechanism(parity_model, ch).leakage_bits, abs=1e-9
    )


def test_compression_keeps_equivocation(binary_component, skewed_component):
    model = DataModel(
        [binary_component, skewed_component, binary_component],
        [TaskSpec((0, 2), gamma_bits=0.5)],
    )
    ch = _random_pair(model, 4, 11)
    _, report = parallelize_compression(model, ch)
    assert report.ok
    assert abs(report.deltas["rate_bits"]) <= 1e-9
    assert all(d >= -1e-9 for d in report.deltas["per_component_bits"])


def test_remark_instance():
    model, ch = remark_instance()
    original = evaluate_mechanism(model, ch)
    assert original.leakage_bits == pytest.approx(0.0, abs=1e-12)
    assert original.rate_bits == pytest.approx(1.0)

    _, report = parallelize_compression(model, ch)
    assert report.ok
    assert report.deltas["leakage_bits"] == pytest.approx(1.0)

    _, report = parallelize_private_prefix(model, ch)
    assert report.deltas["leakage_bits"] == pytest.approx(0.0, abs=1e-9)
    assert report.transformed.utility_bits[0] == pytest.approx(0.0, abs=1e-9)
    assert not report.ok

    _, report = parallelize_privatization(model, ch)
    assert report.ok
    assert report.transformed.utility_bits[0] >= 1.0 - 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_construction_gap_vanishes(parity_model, seed):
    ch = _random_pair(parity_model, 3, seed)
    u_channels = build_U(parity_model, ch)
    assert independence_gap(parity_model, ch, u_channels) == pytest.approx(0.0, abs=1e-12)
    for comp, u in zip(parity_model.components, u_channels):
        _, table = _release_channel(comp, u)
        assert release_gap(comp, u, table) <= 1e-9


def test_wrong_prefix_channel_is_rejected(parity_model):
    ch = _random_pair(parity_model, 3, 7)
    u_channels = build_U(parity_model, ch)
    # reversing the rows sends every even symbol to an odd one
    u = u_channels[1]
    u_channels[1] = Channel(u.in_alphabet, u.out_alphabet, u.rows.flip(0))
    assert independence_gap(parity_model, ch, u_channels) > 1e-3

    # a prefix channel of the raw components is not one of the private features
    raw = build_U(parity_model, ch)
    raw[1] = Channel(u.in_alphabet, [f"x{j}" for j in range(u.n_out)], u.rows)
    assert independence_gap(parity_model, ch, raw) > 1e-3


def test_release_that_reveals_x_is_rejected(parity_component):
    model = DataModel([parity_component], [])
    ch = _random_pair(model, 2, 4)
    (u,) = build_U(model, ch)
    # Z = X depends on S
    table = u.rows[..., None] * torch.eye(parity_component.n_x, dtype=torch.float64)[:, None, :]
    assert release_gap(parity_component, u, table) > 1e-3


def test_compression_gap(two_bit_model):
    ch = _random_pair(two_bit_model, 3, 2)
    _, report = parallelize_compression(two_bit_model, ch)
    assert report.independence_gap == pytest.approx(0.0, abs=1e-12)
