import dataclasses
from typing import Sequence, Tuple

import torch

DTYPE = torch.float64

PMF_ATOL = 1e-9
"""Tolerance for pmf sums and row-stochastic checks."""

MERGE_ATOL = 1e-12
"""Cumulative breakpoints closer than this are treated as equal."""

LP_ATOL = 1e-9
"""Feasibility and optimality tolerance of the allocation simplex."""

MAX_JOINT_SYMBOLS = 4096
"""Desk-scale cap on materialized product alphabets."""

Labels = Tuple[str, ...]


class FunnelError(Exception):
    """Base class of all errors raised by funnelkit."""


class ModelError(FunnelError, ValueError):
    """Raised when a model file or model object violates its invariants."""


class InvalidDistributionError(FunnelError, ValueError):
    """Raised when a pmf, joint table or channel is not a valid distribution."""


class AlphabetMismatchError(FunnelError, ValueError):
    """Raised when two objects are defined over incompatible alphabets."""


class InfeasibleModelError(FunnelError):
    """Raised when utility targets cannot be met by any mechanism."""

    def __init__(self, message: str, tasks: Sequence[int] = ()):
        super().__init__(message)
        self.tasks = tuple(tasks)


class UnachievableAlphaError(FunnelError, ValueError):
    """Raised when more information is requested than a component holds."""


class CapacityError(FunnelError):
    """Raised when an alphabet or problem dimension exceeds its cap."""


class VerificationError(FunnelError):
    """Raised when a synthesized mechanism fails its own post-conditions."""


def as_probs(values) -> torch.Tensor:
    return torch.as_tensor(values, dtype=DTYPE).clone()


def check_pmf(pmf: torch.Tensor, what: str = "pmf") -> None:
    if pmf.dim() != 1 or pmf.numel() == 0:
        raise InvalidDistributionError(f"{what} must be a non-empty vector")
    if not torch.isfinite(pmf).all() or (pmf < 0).any() or (pmf > 1 + PMF_ATOL).any():
        raise InvalidDistributionError(f"{what} entries must lie in [0,1]")
    total = float(pmf.sum())
    if abs(total - 1.0) > PMF_ATOL:
        raise InvalidDistributionError(f"{what} sums to {total!r}, expected 1")


@dataclasses.dataclass(frozen=True, eq=False)
class JointTable:
    """Joint law of a (row, column) pair of discrete variables."""

    row_alphabet: Labels
    col_alphabet: Labels
    probs: torch.Tensor

    def __post_init__(self):
        object.__setattr__(self, "row_alphabet", tuple(self.row_alphabet))
        object.__setattr__(self, "col_alphabet", tuple(self.col_alphabet))
        probs = as_probs(self.probs)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (len(self.row_alphabet), len(self.col_alphabet)):
            raise InvalidDistributionError(
                f"table shape {tuple(probs.shape)} does not match alphabets "
                f"({len(self.row_alphabet)}, {len(self.col_alphabet)})"
            )
        check_pmf(probs.reshape(-1), "joint table")

    @property
    def row_marginal(self) -> torch.Tensor:
        return self.probs.sum(1)

    @property
    def col_marginal(self) -> torch.Tensor:
        return self.probs.sum(0)


@dataclasses.dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic conditional law p(out|in) over labeled alphabets."""

    in_alphabet: Labels
    out_alphabet: Labels
    rows: torch.Tensor

    def __post_init__(self):
        object.__setattr__(self, "in_alphabet", tuple(self.in_alphabet))
        object.__setattr__(self, "out_alphabet", tuple(self.out_alphabet))
        rows = as_probs(self.rows)
        object.__setattr__(self, "rows", rows)
        if rows.shape != (len(self.in_alphabet), len(self.out_alphabet)):
            raise InvalidDistributionError(
                f"channel shape {tuple(rows.shape)} does not match alphabets "
                f"({len(self.in_alphabet)}, {len(self.out_alphabet)})"
            )
        if not torch.isfinite(rows).all() or (rows < 0).any() or (rows > 1 + PMF_ATOL).any():
            raise InvalidDistributionError("channel entries must lie in [0,1]")
        gaps = (rows.sum(1) - 1.0).abs()
        if (gaps > PMF_ATOL).any():
            bad = int(gaps.argmax())
            raise InvalidDistributionError(
                f"channel row {self.in_alphabet[bad]!r} sums to {float(rows[bad].sum())!r}"
            )

    @property
    def n_in(self) -> int:
        return len(self.in_alphabet)

    @property
    def n_out(self) -> int:
        return len(self.out_alphabet)

    def relabel_outputs(self, labels: Sequence[str]) -> "Channel":
        if len(labels) != self.n_out:
            raise AlphabetMismatchError("relabeling must keep the output alphabet size")
        return Channel(self.in_alphabet, tuple(labels), self.rows)
