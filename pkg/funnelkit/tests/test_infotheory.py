import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from funnelkit import infotheory
from funnelkit.infotheory import SoftDecoder
from funnelkit.oracle import random_channel, random_joint
from funnelkit.types import AlphabetMismatchError, InvalidDistributionError, JointTable
from funnelkit.utils import seeded

H_QUARTER = 0.8112781244591328


def _joint(rows):
    probs = torch.tensor(rows, dtype=torch.float64)
    r, c = probs.shape
    return JointTable(tuple(f"c{i}" for i in range(r)), tuple(f"y{j}" for j in range(c)), probs)


def _bsc_joint(flip):
    return _joint([[0.5 * (1 - flip), 0.5 * flip], [0.5 * flip, 0.5 * (1 - flip)]])


pmfs = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: [x / sum(v) for x in v]
)


def test_entropy():
    assert infotheory.entropy([1.0]) == 0.0
    assert infotheory.entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)
    assert infotheory.entropy([0.25, 0.75]) == pytest.approx(H_QUARTER, abs=1e-12)
    assert infotheory.entropy([0.0, 1.0, 0.0]) == 0.0
    with pytest.raises(InvalidDistributionError):
        infotheory.entropy([0.5, 0.6])
    with pytest.raises(InvalidDistributionError):
        infotheory.entropy([-0.5, 1.5])


@given(pmfs)
@settings(max_examples=50, deadline=None)
def test_entropy_bounds(p):
    h = infotheory.entropy(p)
    assert 0.0 <= h <= math.log2(len(p)) + 1e-12


def test_mutual_information():
    assert infotheory.mutual_information(_joint([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(1.0)
    assert infotheory.mutual_information(_joint([[0.125, 0.375], [0.125, 0.375]])) == pytest.approx(0.0, abs=1e-12)
    assert infotheory.mutual_information(_bsc_joint(0.25)) == pytest.approx(1 - H_QUARTER, abs=1e-12)


def test_conditional_entropy():
    assert infotheory.conditional_entropy(_joint([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(0.0, abs=1e-12)
    assert infotheory.conditional_entropy(_joint([[0.125, 0.375], [0.125, 0.375]])) == pytest.approx(1.0)
    assert infotheory.conditional_entropy(_bsc_joint(0.25)) == pytest.approx(H_QUARTER, abs=1e-12)


@given(pmfs, pmfs)
@settings(max_examples=50, deadline=None)
def test_chain_rule(p, q):
    probs = torch.outer(torch.tensor(p, dtype=torch.float64), torch.tensor(q, dtype=torch.float64))
    joint = _joint(probs.tolist())
    h_row = infotheory.entropy(joint.row_marginal)
    mi = infotheory.mutual_information(joint)
    assert mi == pytest.approx(0.0, abs=1e-9)
    assert infotheory.conditional_entropy(joint) == pytest.approx(h_row, abs=1e-9)


def test_kl_divergence():
    assert infotheory.kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert infotheory.kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)
    expected = 0.5 * 1.0 + 0.5 * math.log2(2 / 3)
    assert infotheory.kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-12)
    assert infotheory.kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    with pytest.raises(AlphabetMismatchError):
        infotheory.kl_divergence([0.5, 0.5], [1.0])


@pytest.mark.parametrize("seed", range(8))
def test_information_is_mean_posterior_divergence(seed):
    with seeded(seed):
        joint = random_joint(4, 3)
    p_row, p_col = joint.row_marginal, joint.col_marginal
    total = sum(
        float(p_col[j]) * infotheory.kl_divergence(joint.probs[:, j] / p_col[j], p_row)
        for j in range(p_col.numel())
        if p_col[j] > 0
    )
    mi = infotheory.mutual_information(joint)
    assert mi > 1e-6
    assert mi == pytest.approx(total, abs=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_data_processing(seed):
    with seeded(seed):
        joint = random_joint(4, 3)
        ch = random_channel(joint.col_alphabet, 2)
    pushed = JointTable(joint.row_alphabet, ch.out_alphabet, joint.probs @ ch.rows)
    assert infotheory.mutual_information(pushed) <= infotheory.mutual_information(joint) + 1e-12
    merged = JointTable(joint.row_alphabet, ("y",), joint.probs.sum(1, keepdim=True))
    assert infotheory.mutual_information(merged) == pytest.approx(0.0, abs=1e-12)


def test_log_loss_and_posterior():
    joint = _bsc_joint(0.25)
    posterior = infotheory.optimal_soft_decoder(joint)
    assert torch.allclose(posterior.table, torch.tensor([[0.75, 0.25], [0.25, 0.75]], dtype=torch.float64))
    h = infotheory.conditional_entropy(joint)
    assert infotheory.expected_log_loss(joint, posterior) == pytest.approx(h, abs=1e-12)
    assert infotheory.posterior_kl(joint, posterior) == pytest.approx(0.0, abs=1e-12)

    uniform = SoftDecoder(joint.col_alphabet, joint.row_alphabet, torch.full((2, 2), 0.5))
    assert infotheory.expected_log_loss(joint, uniform) == pytest.approx(1.0)
    # excess loss over the posterior is the expected KL gap
    assert infotheory.expected_log_loss(joint, uniform) == pytest.approx(
        h + infotheory.posterior_kl(joint, uniform), abs=1e-12
    )

    hard = SoftDecoder(joint.col_alphabet, joint.row_alphabet, torch.eye(2))
    assert infotheory.expected_log_loss(joint, hard) == math.inf


def test_decoder_edge_cases():
    identity = _joint([[0.5, 0.0], [0.0, 0.5]])
    dec = infotheory.optimal_soft_decoder(identity)
    assert torch.equal(dec.table, torch.eye(2, dtype=torch.float64))
    assert infotheory.expected_log_loss(identity, dec) == 0.0

    independent = _joint([[0.125, 0.375], [0.125, 0.375]])
    dec = infotheory.optimal_soft_decoder(independent)
    assert torch.allclose(dec.table, torch.full((2, 2), 0.5, dtype=torch.float64))
    assert infotheory.expected_log_loss(independent, dec) == pytest.approx(1.0)

    # unused output symbol falls back to the prior
    sparse = _joint([[0.2, 0.0], [0.8, 0.0]])
    dec = infotheory.optimal_soft_decoder(sparse)
    assert torch.allclose(dec.table[1], torch.tensor([0.2, 0.8], dtype=torch.float64))

    with pytest.raises(AlphabetMismatchError):
        infotheory.expected_log_loss(sparse, SoftDecoder(("a", "b"), sparse.row_alphabet, torch.eye(2)))
    with pytest.raises(InvalidDistributionError):
        SoftDecoder(("a",), ("c0", "c1"), torch.tensor([[0.4, 0.4]]))


def test_batched_measures():
    joints = torch.stack(
        [
            torch.tensor([[0.5, 0.0], [0.0, 0.5]], dtype=torch.float64),
            torch.full((2, 2), 0.25, dtype=torch.float64),
        ]
    )
    mi = infotheory.batched_mutual_information(joints)
    assert torch.allclose(mi, torch.tensor([1.0, 0.0], dtype=torch.float64), atol=1e-12)
