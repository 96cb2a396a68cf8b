"""Information measures in bits over discrete tables.

All measures use the conventions 0·log 0 = 0 and 0·log(0/q) = 0 through
`torch.xlogy`, which is defined to be zero wherever its first argument is zero.
KL divergence and expected log loss return `math.inf` as a value when the
reference assigns zero mass where the law has positive mass.
"""
import dataclasses
import math

import torch

from .types import (
    PMF_ATOL,
    AlphabetMismatchError,
    InvalidDistributionError,
    JointTable,
    Labels,
    as_probs,
    check_pmf,
)

LN2 = math.log(2.0)


def entropy_bits(p: torch.Tensor, dim=-1) -> torch.Tensor:
    """Unchecked entropy along `dim`; accepts arbitrary leading batch dims."""
    return -torch.xlogy(p, p).sum(dim) / LN2


def batched_mutual_information(joints: torch.Tensor) -> torch.Tensor:
    """I(row;col) for a batch of joint tables of shape (..., R, C)."""
    h_row = entropy_bits(joints.sum(-1))
    h_col = entropy_bits(joints.sum(-2))
    h_joint = entropy_bits(joints.flatten(-2))
    return (h_row + h_col - h_joint).clamp_min(0.0)


def entropy(pmf) -> float:
    pmf = as_probs(pmf)
    check_pmf(pmf)
    h = float(entropy_bits(pmf))
    return min(max(h, 0.0), math.log2(pmf.numel()))


def mutual_information(joint: JointTable) -> float:
    p = joint.probs
    value = (
        float(entropy_bits(p.sum(1)))
        + float(entropy_bits(p.sum(0)))
        - float(entropy_bits(p.reshape(-1)))
    )
    return max(value, 0.0)


def conditional_entropy(joint: JointTable) -> float:
    """H(row | col)."""
    p = joint.probs
    value = float(entropy_bits(p.reshape(-1))) - float(entropy_bits(p.sum(0)))
    return max(value, 0.0)


def kl_divergence(p, q) -> float:
    p, q = as_probs(p), as_probs(q)
    if p.shape != q.shape:
        raise AlphabetMismatchError(
            f"KL divergence over alphabets of size {p.numel()} and {q.numel()}"
        )
    check_pmf(p, "p")
    check_pmf(q, "q")
    support = p > 0
    if (q[support] == 0).any():
        return math.inf
    ps, qs = p[support], q[support]
    value = float((ps * (torch.log(ps) - torch.log(qs))).sum()) / LN2
    return max(value, 0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class SoftDecoder:
    """Pmf-valued estimate of a task variable for every output symbol."""

    out_alphabet: Labels
    task_alphabet: Labels
    table: torch.Tensor

    def __post_init__(self):
        object.__setattr__(self, "out_alphabet", tuple(self.out_alphabet))
        object.__setattr__(self, "task_alphabet", tuple(self.task_alphabet))
        table = as_probs(self.table)
        object.__setattr__(self, "table", table)
        if table.shape != (len(self.out_alphabet), len(self.task_alphabet)):
            raise InvalidDistributionError("decoder table does not match its alphabets")
        if (table < 0).any() or ((table.sum(1) - 1.0).abs() > PMF_ATOL).any():
            raise InvalidDistributionError("decoder rows must be pmfs")


def _check_decoder(joint: JointTable, decoder: SoftDecoder) -> None:
    if decoder.task_alphabet != joint.row_alphabet:
        raise AlphabetMismatchError("decoder task alphabet differs from the joint rows")
    if decoder.out_alphabet != joint.col_alphabet:
        raise AlphabetMismatchError("decoder output alphabet differs from the joint columns")


def expected_log_loss(joint: JointTable, decoder: SoftDecoder) -> float:
    """E[log2 1/ĉ_Y(C)] for a joint over (C, Y)."""
    _check_decoder(joint, decoder)
    p = joint.probs
    q = decoder.table.t()  # (C, Y) like the joint
    support = p > 0
    if (q[support] == 0).any():
        return math.inf
    return float(-(p[support] * torch.log(q[support])).sum()) / LN2


def posterior_kl(joint: JointTable, decoder: SoftDecoder) -> float:
    """E_Y[KL(p_{C|Y} || ĉ_Y)], the excess loss of `decoder` over the posterior."""
    _check_decoder(joint, decoder)
    p_y = joint.col_marginal
    posterior = optimal_soft_decoder(joint).table
    total = 0.0
    for y in range(len(joint.col_alphabet)):
        if p_y[y] > 0:
            total += float(p_y[y]) * kl_divergence(posterior[y], decoder.table[y])
    return total


def optimal_soft_decoder(joint: JointTable) -> SoftDecoder:
    """Posterior decoder p_{C|Y}; rows of zero-probability outputs use the prior p_C."""
    p = joint.probs
    p_y = p.sum(0)
    prior = p.sum(1)
    table = prior.expand(p.shape[1], -1).clone()
    live = p_y > 0
    table[live] = (p[:, live] / p_y[live]).t()
    table = table / table.sum(1, keepdim=True)
    return SoftDecoder(joint.col_alphabet, joint.row_alphabet, table)
