"""Differential-privacy level of a mechanism with respect to the private vector.

Neighbouring private vectors differ in exactly one coordinate (Hamming
distance 1). ε is reported in nats.
"""
import dataclasses
import logging
import math
from typing import Optional, Tuple

import torch

from .channel import ProductChannel, joint_with_input
from .model import DataModel
from .parallelize import parallelize_privatization
from .types import DTYPE, PMF_ATOL, Channel
from .utils import seeded

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class DpReport:
    epsilon_nats: float
    witness: Optional[Tuple[str, str, str]]  # (y, s, s')


def _private_conditional(model: DataModel, ch: Channel) -> Tuple[torch.Tensor, torch.Tensor]:
    """p(s) and p(y|s) over the model's private product alphabet."""
    joint = joint_with_input(model, ch).probs
    n_priv = len(model.private_alphabet)
    p_sy = torch.zeros(n_priv, ch.n_out, dtype=DTYPE)
    p_sy.index_add_(0, model.private_index(), joint)
    p_s = p_sy.sum(1)
    cond = p_sy / p_s.clamp_min(1e-300)[:, None]
    return p_s, cond


def _pairs(model: DataModel, p_s: torch.Tensor, distance: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """Index pairs (a < b) of positive-probability private vectors at the given Hamming distance."""
    coords = model.private_alphabet.coords
    live = torch.nonzero(p_s > 0).flatten()
    c = coords[live]
    dist = (c[:, None, :] != c[None, :, :]).sum(-1)
    a, b = torch.nonzero(torch.triu(dist == distance, diagonal=1), as_tuple=True)
    return live[a], live[b]


def _log_ratios(cond: torch.Tensor, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """|ln p(y|s_a) − ln p(y|s_b)| per pair and output; inf when exactly one side is zero."""
    pa, pb = cond[a], cond[b]
    both = (pa > 0) & (pb > 0)
    ratio = (pa.clamp_min(1e-300).log() - pb.clamp_min(1e-300).log()).abs()
    out = torch.where(both, ratio, torch.zeros_like(ratio))
    return torch.where((pa > 0) ^ (pb > 0), torch.full_like(ratio, math.inf), out)


def epsilon(model: DataModel, ch: Channel) -> DpReport:
    """Smallest ε with p(y|s) ≤ e^ε p(y|s') for all outputs and neighbouring s, s'."""
    p_s, cond = _private_conditional(model, ch)
    a, b = _pairs(model, p_s, 1)
    if a.numel() == 0:
        return DpReport(0.0, None)
    ratios = _log_ratios(cond, a, b)
    flat = int(ratios.argmax())
    pair, y = divmod(flat, ch.n_out)
    eps = float(ratios.reshape(-1)[flat])
    labels = model.private_alphabet.labels
    witness = (ch.out_alphabet[y], labels[int(a[pair])], labels[int(b[pair])])
    logger.debug("epsilon=%.6g nats at %s", eps, witness)
    return DpReport(eps, witness)


def epsilon_product(model: DataModel, product: ProductChannel) -> DpReport:
    """ε of a product mechanism: the largest per-component ε.

    Neighbours differ in one coordinate, so the other factors cancel in every
    ratio and the product never has to be built.
    """
    product.check(model)
    best = DpReport(0.0, None)
    for i, (comp, ch) in enumerate(zip(model.components, product.factors)):
        report = epsilon(DataModel([comp], []), ch)
        if report.witness and (best.witness is None or report.epsilon_nats > best.epsilon_nats):
            y, s, t = report.witness
            best = DpReport(report.epsilon_nats, (y, f"{i}:{s}", f"{i}:{t}"))
    return best


def verify_dp_parallelization(model: DataModel, ch: Channel) -> Tuple[DpReport, DpReport, bool]:
    """ε of `ch` and of its parallelized privatization, and whether ε did not grow."""
    product, _ = parallelize_privatization(model, ch)
    original = epsilon(model, ch)
    parallel = epsilon_product(model, product)
    ok = parallel.epsilon_nats <= original.epsilon_nats + PMF_ATOL
    return original, parallel, ok


def group_property_gap(model: DataModel, ch: Channel, pairs: int = 64, seed: int = 0) -> float:
    """max over sampled (y, s, s') at Hamming distance 2 of |ln ratio| − 2ε.

    Non-positive when the group property holds; -inf when no such pair exists.
    """
    p_s, cond = _private_conditional(model, ch)
    a, b = _pairs(model, p_s, 2)
    if a.numel() == 0:
        return -math.inf
    eps = epsilon(model, ch).epsilon_nats
    if math.isinf(eps):
        return -math.inf
    with seeded(seed):
        pick = torch.randperm(a.numel())[:pairs]
    ratios = _log_ratios(cond, a[pick], b[pick])
    return float(ratios.max()) - 2.0 * eps
