import dataclasses
import logging
import warnings
from typing import Optional

from . import frl
from .channel import identity_channel, mixture_channel
from .model import ComponentModel
from .types import MERGE_ATOL, PMF_ATOL, Channel, UnachievableAlphaError

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ComponentSolution:
    alpha_bits: float
    tau_bits: float
    leakage_bits: float
    mix_p: Optional[float]
    channel: Channel


def threshold(comp: ComponentModel) -> float:
    """Leakage-free threshold τ = H(X) − H(S) = H(X|S)."""
    return max(comp.h_x - comp.h_s, 0.0)


def funnel_leakage(alpha: float, tau: float) -> float:
    """Minimum I(S;Y) subject to I(X;Y) ≥ alpha for a deterministic private map."""
    if alpha < 0 or tau < 0:
        raise ValueError("alpha and tau must be non-negative")
    return max(0.0, alpha - tau)


def synthesize(comp: ComponentModel, alpha: float) -> ComponentSolution:
    """Build the mechanism releasing `alpha` bits of X_i with minimum leakage.

    At or below τ the leakage-free privatizer Y^f is released. Above τ, Y^f is
    released with probability p = (H(X) − α)/H(S) and the raw symbol otherwise.
    """
    h_x, h_s = comp.h_x, comp.h_s
    tau = threshold(comp)
    if alpha > h_x + PMF_ATOL:
        raise UnachievableAlphaError(
            f"alpha={alpha:.6g} bits exceeds H(X)={h_x:.6g} bits"
        )
    if alpha < 0:
        raise UnachievableAlphaError("alpha must be non-negative")
    alpha = min(alpha, h_x)

    if alpha <= tau:
        if alpha < tau - MERGE_ATOL:
            warnings.warn(
                f"alpha={alpha:.6g} is below the leakage-free threshold {tau:.6g}; "
                "releasing the leakage-free privatizer, which carries tau bits"
            )
        if h_s <= MERGE_ATOL and alpha >= h_x - MERGE_ATOL:
            channel = identity_channel(comp.alphabet_x)
        else:
            channel = frl.leakage_free_privatizer(comp)
        return ComponentSolution(alpha, tau, 0.0, None, channel)

    p = (h_x - alpha) / h_s
    assert -MERGE_ATOL <= p <= 1.0 + MERGE_ATOL, p
    p = min(max(p, 0.0), 1.0)
    free = frl.leakage_free_privatizer(comp)
    channel = mixture_channel(free, identity_channel(comp.alphabet_x), p, tags=("free", "raw"))
    logger.debug("alpha=%.6g tau=%.6g -> mixing p=%.6g", alpha, tau, p)
    return ComponentSolution(alpha, tau, funnel_leakage(alpha, tau), p, channel)
