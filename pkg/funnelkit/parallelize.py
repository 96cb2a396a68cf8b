"""Turn an arbitrary joint mechanism into a product of per-component channels.

Three constructions share one prefix machinery. Component `i` of the output
carries the earlier components' features (private features S_1..S_{i-1} or raw
components X_1..X_{i-1}) together with Y, drawn from its conditional law given
the component's own feature:

  - privatization: Y'_i = (U_i, Z_i) with U_i ~ p(s_<i, y | s_i) and Z_i from
    the functional representation of X_i given (U_i, S_i). Leakage is kept and
    no task loses utility.
  - compression: Y''_i ~ p(x_<i, y | x_i). The equivocation H(X|Y) is kept, but
    leakage may grow.
  - private prefix: Y''_i = U_i alone. Leakage is kept, utility may drop.
"""
import dataclasses
import logging
import math
from typing import Dict, List, Tuple

import torch

from . import infotheory
from .channel import (
    MechanismMetrics,
    ProductChannel,
    evaluate_mechanism,
    evaluate_product,
    joint_with_input,
)
from .frl import functional_representation
from .model import ComponentModel, DataModel, TaskSpec
from .types import DTYPE, PMF_ATOL, AlphabetMismatchError, Channel, JointTable, Labels
from .utils import ProductAlphabet

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ParallelizationReport:
    construction: str
    original: MechanismMetrics
    transformed: MechanismMetrics
    product_form_ok: bool
    deltas: Dict[str, object]
    independence_gap: float
    ok: bool


def _features(model: DataModel, private: bool) -> Tuple[torch.Tensor, List[int], List[Labels]]:
    """Feature index of every joint symbol, per-component feature sizes and labels."""
    if private:
        return (
            model.private_index(),
            [c.n_s for c in model.components],
            [c.alphabet_s for c in model.components],
        )
    return (
        torch.arange(len(model.alphabet)),
        [c.n_x for c in model.components],
        [c.alphabet_x for c in model.components],
    )


def _prefix_labels(alphabets: List[Labels], i: int, ch: Channel) -> List[str]:
    """Labels of (feature_<i, y), lexicographic with y last."""
    if i == 0:
        return list(ch.out_alphabet)
    pre = ProductAlphabet(alphabets[:i]).labels
    return [f"{p}|{y}" for p in pre for y in ch.out_alphabet]


def _prefix_channels(model: DataModel, ch: Channel, private: bool) -> List[Channel]:
    """Per-component channels X_i -> (prefix_<i, Y), prefix of S or of X."""
    joint = joint_with_input(model, ch).probs
    alphabet = model.alphabet
    _, _, alphabets = _features(model, private)
    ny = ch.n_out
    channels = []
    for i, comp in enumerate(model.components):
        earlier = model.components[:i]
        if i == 0:
            pre_index = torch.zeros(len(alphabet), dtype=torch.long)
        elif private:
            pre_index = alphabet.ravel(range(i), [c.private_map for c in earlier])
        else:
            pre_index = alphabet.ravel(range(i))
        labels = _prefix_labels(alphabets, i, ch)

        u_index = pre_index[:, None] * ny + torch.arange(ny)
        x_index = alphabet.coords[:, i, None].expand_as(u_index)
        table = torch.zeros(comp.n_x, len(labels), dtype=DTYPE)
        table.index_put_((x_index, u_index), joint, accumulate=True)

        # condition on the component's own feature: S_i for U, X_i otherwise
        group = torch.tensor(comp.private_map if private else list(range(comp.n_x)))
        grouped = torch.zeros(int(group.max()) + 1, table.shape[1], dtype=DTYPE)
        grouped.index_add_(0, group, table)
        mass = grouped.sum(1, keepdim=True)
        cond = torch.where(mass > 0, grouped / mass.clamp_min(1e-300), table.sum(0))
        rows = cond[group]

        live = torch.nonzero(table.sum(0) > 0).flatten()
        channels.append(Channel(comp.alphabet_x, [labels[int(u)] for u in live], rows[:, live]))
        logger.debug("component %d: prefix channel with %d outputs", i, live.numel())
    return channels


def build_U(model: DataModel, ch: Channel) -> List[Channel]:
    """Channels X_i -> U_i with p(u_i|x_i) = p(s_1..s_{i-1}, y | f_i(x_i))."""
    return _prefix_channels(model, ch, private=True)


def _release_table(comp: ComponentModel, u_ch: Channel) -> Tuple[torch.Tensor, Labels]:
    """p(u, z | x) as an (X, U, Z) tensor, Z the functional representation of X
    given W = (U, S)."""
    nu, ns, nx = u_ch.n_out, comp.n_s, comp.n_x
    s_of = torch.tensor(comp.private_map)
    p_xu = comp.pmf[:, None] * u_ch.rows
    w_of = torch.arange(nu)[None, :] * ns + s_of[:, None]

    p_w = torch.zeros(nu * ns, dtype=DTYPE).index_add_(0, w_of.reshape(-1), p_xu.reshape(-1))
    live = torch.nonzero(p_w > 0).flatten()
    col_of = torch.full((nu * ns,), -1, dtype=torch.long)
    col_of[live] = torch.arange(live.numel())
    cols = col_of[w_of]

    probs = torch.zeros(nx, live.numel(), dtype=DTYPE)
    hit = cols >= 0
    x_idx = torch.arange(nx)[:, None].expand_as(cols)
    probs.index_put_((x_idx[hit], cols[hit]), p_xu[hit], accumulate=True)
    w_labels = [
        f"{u_ch.out_alphabet[int(w) // ns]}/{comp.alphabet_s[int(w) % ns]}" for w in live
    ]
    rep = functional_representation(JointTable(comp.alphabet_x, w_labels, probs))

    z_given = rep.conditional()[x_idx, cols.clamp_min(0)]  # (X, U, Z)
    z_given = torch.where(hit[..., None], z_given, rep.z_pmf)
    return u_ch.rows[..., None] * z_given, rep.z_alphabet


def _release_channel(comp: ComponentModel, u_ch: Channel) -> Tuple[Channel, torch.Tensor]:
    """Y'_i = (U_i, Z_i) as a channel, plus the (X, U, Z) table it flattens."""
    table, z_alphabet = _release_table(comp, u_ch)
    rows = table.reshape(comp.n_x, -1)
    keep = torch.nonzero(rows.sum(0) > 0).flatten()
    nz = len(z_alphabet)
    labels = [
        f"{u_ch.out_alphabet[int(j) // nz]};{z_alphabet[int(j) % nz]}" for j in keep
    ]
    return Channel(comp.alphabet_x, labels, rows[:, keep]), table


def independence_gap(
    model: DataModel, ch: Channel, channels: List[Channel], private: bool = True
) -> float:
    """Largest total variation between a constructed (feature_i, prefix_i) joint
    and the one implied by the joint law of (features, Y) under `ch`.

    Features are the private S_i when `private`, the raw X_i otherwise. Zero
    exactly when every prefix channel has the conditional law p(prefix_<i, y |
    feature_i) on the support of the feature.
    """
    ProductChannel(channels).check(model)
    feature, sizes, alphabets = _features(model, private)
    joint = joint_with_input(model, ch).probs
    law = torch.zeros(math.prod(sizes), ch.n_out, dtype=DTYPE)
    law = law.index_add_(0, feature, joint).reshape(sizes + [ch.n_out])

    worst = 0.0
    for i, (comp, u_ch) in enumerate(zip(model.components, channels)):
        target = law.sum(dim=tuple(range(i + 1, len(sizes)))) if i + 1 < len(sizes) else law
        target = target.movedim(i, 0).reshape(sizes[i], -1)
        labels = _prefix_labels(alphabets, i, ch)
        column = {label: j for j, label in enumerate(labels)}
        # outputs outside the prefix alphabet land in one extra column
        cols = torch.tensor([column.get(label, len(labels)) for label in u_ch.out_alphabet])

        group = torch.tensor(comp.private_map if private else list(range(comp.n_x)))
        per_x = torch.zeros(comp.n_x, len(labels) + 1, dtype=DTYPE)
        per_x.index_add_(1, cols, comp.pmf[:, None] * u_ch.rows)
        built = torch.zeros(sizes[i], len(labels) + 1, dtype=DTYPE).index_add_(0, group, per_x)
        target = torch.cat((target, torch.zeros(sizes[i], 1, dtype=DTYPE)), 1)
        worst = max(worst, 0.5 * float((built - target).abs().sum()))
    return worst


def release_gap(comp: ComponentModel, u_ch: Channel, table: torch.Tensor) -> float:
    """How far an (X, U, Z) release table is from a valid representation.

    Zero for a valid one. Reported as the largest of
      - TV between the (X, U) marginal and p(x)·p(u|x),
      - TV between the (W, Z) joint and the product of its marginals, W = (U, S),
      - H(X | U, S, Z) in bits.
    """
    if table.shape[:2] != (comp.n_x, u_ch.n_out):
        raise AlphabetMismatchError("release table does not match the component and U")
    p_xuz = comp.pmf[:, None, None] * table
    marginal = 0.5 * float((p_xuz.sum(-1) - comp.pmf[:, None] * u_ch.rows).abs().sum())

    p_suz = torch.zeros(comp.n_s, *p_xuz.shape[1:], dtype=DTYPE)
    p_suz.index_add_(0, torch.tensor(comp.private_map), p_xuz)
    p_w = p_suz.sum(-1, keepdim=True)
    p_z = p_suz.sum((0, 1), keepdim=True)
    dependence = 0.5 * float((p_suz - p_w * p_z).abs().sum())

    # S is a function of X, so H(X,U,Z) - H(S,U,Z) = H(X|U,S,Z)
    residual = float(
        infotheory.entropy_bits(p_xuz.reshape(-1)) - infotheory.entropy_bits(p_suz.reshape(-1))
    )
    return max(marginal, dependence, residual)


def _report(
    construction: str,
    model: DataModel,
    ch: Channel,
    product: ProductChannel,
    keeps: str,
    gap: float,
) -> ParallelizationReport:
    original = evaluate_mechanism(model, ch)
    transformed = evaluate_product(model, product)
    deltas = {
        "leakage_bits": transformed.leakage_bits - original.leakage_bits,
        "rate_bits": transformed.rate_bits - original.rate_bits,
        "utility_bits": [
            b - a for a, b in zip(original.utility_bits, transformed.utility_bits)
        ],
        "per_component_bits": [
            b - a for a, b in zip(original.per_component_bits, transformed.per_component_bits)
        ],
    }
    ok = gap <= PMF_ATOL
    if keeps == "leakage":
        ok = ok and abs(deltas["leakage_bits"]) <= PMF_ATOL
        ok = ok and all(d >= -PMF_ATOL for d in deltas["utility_bits"])
    else:
        # H(X|Y'') - H(X|Y) is the negated rate delta
        ok = ok and abs(deltas["rate_bits"]) <= PMF_ATOL
        ok = ok and all(d >= -PMF_ATOL for d in deltas["utility_bits"])
        ok = ok and all(d >= -PMF_ATOL for d in deltas["per_component_bits"])
    logger.info(
        "%s: leakage %.6g -> %.6g bits, construction gap %.3g, ok=%s",
        construction,
        original.leakage_bits,
        transformed.leakage_bits,
        gap,
        ok,
    )
    return ParallelizationReport(
        construction=construction,
        original=original,
        transformed=transformed,
        product_form_ok=True,
        deltas=deltas,
        independence_gap=gap,
        ok=ok,
    )


def parallelize_privatization(
    model: DataModel, ch: Channel
) -> Tuple[ProductChannel, ParallelizationReport]:
    """Product mechanism with the same leakage and no less utility than `ch`."""
    u_channels = build_U(model, ch)
    releases = [_release_channel(c, u) for c, u in zip(model.components, u_channels)]
    gap = max(
        [independence_gap(model, ch, u_channels)]
        + [release_gap(c, u, t) for c, u, (_, t) in zip(model.components, u_channels, releases)]
    )
    product = ProductChannel([r for r, _ in releases])
    return product, _report("privatization", model, ch, product, "leakage", gap)


def parallelize_compression(
    model: DataModel, ch: Channel
) -> Tuple[ProductChannel, ParallelizationReport]:
    """Product mechanism with the same H(X|Y) and no less information per component."""
    channels = _prefix_channels(model, ch, private=False)
    gap = independence_gap(model, ch, channels, private=False)
    product = ProductChannel(channels)
    return product, _report("compression", model, ch, product, "equivocation", gap)


def parallelize_private_prefix(
    model: DataModel, ch: Channel
) -> Tuple[ProductChannel, ParallelizationReport]:
    """Release U_i alone. Keeps leakage; utility is reported, not guaranteed."""
    u_channels = build_U(model, ch)
    gap = independence_gap(model, ch, u_channels)
    product = ProductChannel(u_channels)
    return product, _report("private_prefix", model, ch, product, "leakage", gap)




def remark_instance() -> Tuple[DataModel, Channel]:
    """Two uniform 4-ary components with parity private features; Y is the high
    bit of X_1 xor the parity of X_2.

    Y leaks nothing about S and carries one bit about X. Releasing raw prefixes
    exposes the parity of X_2, and releasing U alone loses the bit.
    """
    comp = ComponentModel(
        alphabet_x=("0", "1", "2", "3"),
        pmf=[0.25] * 4,
        private_map=(0, 1, 0, 1),
        alphabet_s=("even", "odd"),
    )
    model = DataModel([comp, comp], [TaskSpec((0, 1), gamma_bits=1.0)])
    coords = model.alphabet.coords
    y = (coords[:, 0] // 2) ^ (coords[:, 1] % 2)
    rows = torch.nn.functional.one_hot(y, 2).to(DTYPE)
    return model, Channel(model.alphabet.labels, ("0", "1"), rows)
