import dataclasses
import logging
from typing import List, Tuple

import torch

from .model import ComponentModel
from .types import MERGE_ATOL, Channel, JointTable, Labels

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class FrlRepresentation:
    """Z independent of W with X = assign[W, Z].

    Interval `j` of [0,1) is `intervals[j]`; its length is `z_pmf[j]`.
    """

    x_alphabet: Labels
    w_alphabet: Labels
    z_alphabet: Labels
    z_pmf: torch.Tensor
    assign: torch.Tensor  # (|W|, |Z|) long, index into x_alphabet
    intervals: List[Tuple[float, float]]

    def band_mass(self) -> torch.Tensor:
        """(|X|, |W|) table of Σ_{z: assign(w,z)=x} z_pmf(z), i.e. p(x|w) rebuilt."""
        hits = self.assign[None, :, :] == torch.arange(len(self.x_alphabet))[:, None, None]
        return (hits * self.z_pmf).sum(-1)

    def conditional(self) -> torch.Tensor:
        """p(z | x, w) as a (|X|, |W|, |Z|) tensor.

        Given (x, w), Z is uniform-by-length over the intervals of x's band
        under w. Pairs whose band is empty carry no mass and get z_pmf.
        """
        hits = self.assign[None, :, :] == torch.arange(len(self.x_alphabet))[:, None, None]
        out = hits * self.z_pmf
        mass = out.sum(-1, keepdim=True)
        return torch.where(mass > 0, out / mass.clamp_min(1e-300), self.z_pmf.expand_as(out))


def _merged_breakpoints(cums: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Kept breakpoints (cluster minima) and the interval grid ending at 1."""
    points = torch.cat((cums.reshape(-1), torch.ones(1, dtype=cums.dtype)))
    kept = [0.0]
    for v in torch.sort(points).values.tolist():
        if v - kept[-1] > MERGE_ATOL:
            kept.append(v)
    kept = torch.tensor(kept, dtype=cums.dtype)
    grid = kept.clone()
    grid[-1] = 1.0
    return kept, grid


def functional_representation(joint: JointTable) -> FrlRepresentation:
    """Quantile construction for a joint over (X, W).

    Every live conditional p(X|W=w) is stacked on [0,1) in alphabet order. The
    union of all stacking breakpoints cuts [0,1) into intervals; Z is the
    interval index. Interval lengths do not depend on w, so Z is independent
    of W, and each interval lies inside exactly one band for each w, so X is
    a function of (W, Z).
    """
    p = joint.probs
    nx, nw = p.shape
    p_w = p.sum(0)
    live = torch.nonzero(p_w > 0).flatten()
    cums = (p[:, live] / p_w[live]).cumsum(0)
    kept, grid = _merged_breakpoints(cums)
    z_pmf = grid[1:] - grid[:-1]
    nz = z_pmf.numel()

    # grid index of the cluster each cumulative value was merged into
    snapped = torch.bucketize(cums, kept, right=True) - 1
    snapped[-1] = nz

    assign = torch.zeros(nw, nz, dtype=torch.long)
    for col, w in enumerate(live.tolist()):
        lo = 0
        for x in range(nx):
            hi = int(snapped[x, col])
            if hi > lo:
                assign[w, lo:hi] = x
                lo = hi
    if live.numel() < nw:
        mids = (grid[1:] + grid[:-1]) / 2
        fill = torch.bucketize(mids, p.sum(1).cumsum(0), right=True).clamp_max(nx - 1)
        for w in torch.nonzero(p_w == 0).flatten().tolist():
            assign[w] = fill

    logger.debug("functional representation: |X|=%d |W|=%d |Z|=%d", nx, nw, nz)
    return FrlRepresentation(
        x_alphabet=joint.row_alphabet,
        w_alphabet=joint.col_alphabet,
        z_alphabet=tuple(f"z{j}" for j in range(nz)),
        z_pmf=z_pmf,
        assign=assign,
        intervals=list(zip(grid[:-1].tolist(), grid[1:].tolist())),
    )


def leakage_free_privatizer(comp: ComponentModel) -> Channel:
    """Channel X -> Y^f with Y^f independent of S and X a function of (S, Y^f)."""
    rep = functional_representation(comp.joint_xs())
    cond = rep.conditional()  # (X, S, Z)
    rows = cond[torch.arange(comp.n_x), torch.tensor(comp.private_map)]
    return Channel(comp.alphabet_x, rep.z_alphabet, rows)
