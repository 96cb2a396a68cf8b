"""Channel algebra and mechanism evaluation."""
import dataclasses
import functools
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import torch

from . import infotheory
from .model import DataModel, joint_pmf
from .types import (
    MAX_JOINT_SYMBOLS,
    PMF_ATOL,
    AlphabetMismatchError,
    Channel,
    InvalidDistributionError,
    JointTable,
    Labels,
    as_probs,
)
from .utils import ProductAlphabet

logger = logging.getLogger(__name__)


def identity_channel(alphabet: Labels) -> Channel:
    return Channel(alphabet, alphabet, torch.eye(len(alphabet), dtype=torch.float64))


def constant_channel(alphabet: Labels, symbol: str = "*") -> Channel:
    return Channel(alphabet, (symbol,), torch.ones(len(alphabet), 1, dtype=torch.float64))


def push_joint(input_pmf, ch: Channel) -> JointTable:
    """Joint law p_X(x)·p(y|x) over (in, out)."""
    p = as_probs(input_pmf)
    if p.shape != (ch.n_in,):
        raise AlphabetMismatchError(
            f"input pmf has {p.numel()} symbols, channel expects {ch.n_in}"
        )
    return JointTable(ch.in_alphabet, ch.out_alphabet, p[:, None] * ch.rows)


def relabel_through(
    mapping: Sequence[int], joint: JointTable, alphabet: Optional[Labels] = None
) -> JointTable:
    """Push the row variable through a deterministic map, summing merged rows."""
    mapping = torch.as_tensor(list(mapping), dtype=torch.long)
    if mapping.shape != (len(joint.row_alphabet),):
        raise AlphabetMismatchError("map must be total over the row alphabet")
    if alphabet is None:
        alphabet = tuple(str(i) for i in range(int(mapping.max()) + 1))
    probs = torch.zeros(len(alphabet), len(joint.col_alphabet), dtype=joint.probs.dtype)
    probs.index_add_(0, mapping, joint.probs)
    return JointTable(alphabet, joint.col_alphabet, probs)


def product_channel(channels: Sequence[Channel], cap: int = MAX_JOINT_SYMBOLS) -> Channel:
    """Channel applying each factor to its own coordinate, lexicographic order."""
    channels = list(channels)
    if not channels:
        raise ValueError("product of zero channels")
    if len(channels) == 1:
        return channels[0]
    ins = ProductAlphabet([c.in_alphabet for c in channels], cap=cap)
    outs = ProductAlphabet([c.out_alphabet for c in channels], cap=cap)
    rows = functools.reduce(torch.kron, [c.rows for c in channels])
    return Channel(ins.labels, outs.labels, rows)


def mixture_channel(
    a: Channel, b: Channel, p: float, tags: Tuple[str, str] = ("a", "b")
) -> Channel:
    """Use `a` with probability p and `b` otherwise; the branch stays observable."""
    if a.in_alphabet != b.in_alphabet:
        raise AlphabetMismatchError("mixed channels must share the input alphabet")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing probability {p} outside [0,1]")
    out = tuple(f"{tags[0]}:{y}" for y in a.out_alphabet) + tuple(
        f"{tags[1]}:{y}" for y in b.out_alphabet
    )
    rows = torch.cat((p * a.rows, (1.0 - p) * b.rows), 1)
    return Channel(a.in_alphabet, out, rows)


@dataclasses.dataclass
class MechanismMetrics:
    leakage_bits: float
    utility_bits: List[float]
    rate_bits: float
    per_component_bits: List[float]
    distortion_bits: List[float]

    def satisfied(self, gammas: Sequence[float], atol: float = PMF_ATOL) -> List[bool]:
        return [u >= g - atol for u, g in zip(self.utility_bits, gammas)]


def joint_with_input(model: DataModel, ch: Channel) -> JointTable:
    """Joint law of (X, Y) for a channel over the model's product alphabet."""
    if ch.in_alphabet != model.alphabet.labels:
        raise AlphabetMismatchError(
            "channel input alphabet differs from the model's product alphabet"
        )
    return push_joint(joint_pmf(model, range(model.n_components)), ch)


def evaluate_mechanism(model: DataModel, ch: Channel) -> MechanismMetrics:
    """Leakage I(S;Y), utilities I(C_k;Y), rate I(X;Y) and I(X_i;Y) of a joint channel."""
    n = model.n_components
    joint = joint_with_input(model, ch)
    leakage = infotheory.mutual_information(
        relabel_through(model.private_index(), joint, model.private_alphabet.labels)
    )
    utilities, distortions = [], []
    for task in model.tasks:
        sub = relabel_through(model.alphabet.ravel(task.components), joint)
        utilities.append(infotheory.mutual_information(sub))
        distortions.append(infotheory.conditional_entropy(sub))
    per_component = [
        infotheory.mutual_information(
            relabel_through(model.alphabet.ravel([i]), joint, model.components[i].alphabet_x)
        )
        for i in range(n)
    ]
    return MechanismMetrics(
        leakage_bits=leakage,
        utility_bits=utilities,
        rate_bits=infotheory.mutual_information(joint),
        per_component_bits=per_component,
        distortion_bits=distortions,
    )


@dataclasses.dataclass(frozen=True, eq=False)
class ProductChannel:
    """Parallelized mechanism kept in factor form, one channel per component."""

    factors: Tuple[Channel, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def check(self, model: DataModel) -> None:
        if len(self.factors) != model.n_components:
            raise AlphabetMismatchError("one factor per component expected")
        for c, ch in zip(model.components, self.factors):
            if ch.in_alphabet != c.alphabet_x:
                raise AlphabetMismatchError("factor input differs from its component alphabet")

    def output_size(self) -> int:
        size = 1
        for ch in self.factors:
            size *= ch.n_out
        return size

    def materialize(self, cap: int = MAX_JOINT_SYMBOLS) -> Channel:
        return product_channel(self.factors, cap=cap)


def evaluate_product(model: DataModel, product: ProductChannel) -> MechanismMetrics:
    """Metrics of a product mechanism, computed factor by factor.

    Exact for product channels over independent components: leakage, rate and
    task utilities are sums of per-component terms.
    """
    product.check(model)
    leak, info, cond = [], [], []
    for comp, ch in zip(model.components, product.factors):
        joint = push_joint(comp.pmf, ch)
        info.append(infotheory.mutual_information(joint))
        cond.append(infotheory.conditional_entropy(joint))
        leak.append(
            infotheory.mutual_information(
                relabel_through(comp.private_map, joint, comp.alphabet_s)
            )
        )
    return MechanismMetrics(
        leakage_bits=sum(leak),
        utility_bits=[sum(info[i] for i in t.components) for t in model.tasks],
        rate_bits=sum(info),
        per_component_bits=info,
        distortion_bits=[sum(cond[i] for i in t.components) for t in model.tasks],
    )


def achieves(
    metrics: MechanismMetrics,
    rate: float,
    leakage: float,
    distortions: Sequence[float],
    atol: float = PMF_ATOL,
) -> bool:
    """Whether (R, L, D_1..D_K) lies in the region certified by this mechanism."""
    if len(distortions) != len(metrics.distortion_bits):
        raise ValueError("one distortion level per task expected")
    return (
        rate >= metrics.rate_bits - atol
        and leakage >= metrics.leakage_bits - atol
        and all(d >= h - atol for d, h in zip(distortions, metrics.distortion_bits))
    )


def channel_to_dict(ch: Channel) -> dict:
    return {"in": list(ch.in_alphabet), "out": list(ch.out_alphabet), "rows": ch.rows.tolist()}


def channel_from_dict(spec: dict) -> Channel:
    try:
        return Channel(spec["in"], spec["out"], spec["rows"])
    except InvalidDistributionError:
        raise
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise InvalidDistributionError(f"malformed channel spec: {e!r}") from e


def load_channel(path: Union[str, Path]) -> Channel:
    path = Path(path)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InvalidDistributionError(f"{path}: {e}") from e
    return channel_from_dict(spec)


def save_channel(ch: Channel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(ch)), encoding="utf-8")
