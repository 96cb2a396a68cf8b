"""Allocation of released information across components.

The minimum-leakage problem reduces to a linear program over the per-component
amounts α_i: minimize Σ(α_i − τ_i) subject to Σ_{i∈C_k} α_i ≥ γ(C_k) and
τ_i ≤ α_i ≤ H(X_i). The upper bound is not needed for the optimum value but
keeps every returned α synthesizable.
"""
import dataclasses
import logging
from typing import List, Optional, Sequence

import numpy as np

from . import funnel
from .channel import MechanismMetrics, ProductChannel, evaluate_product
from .model import ComponentModel, DataModel, TaskSpec
from .types import LP_ATOL, InfeasibleModelError, VerificationError

logger = logging.getLogger(__name__)

LEX_SLACK = 1e-11
MAX_PIVOTS = 100_000


class UnboundedError(Exception):
    "Raised when the objective of a linear program is unbounded below."


@dataclasses.dataclass
class LinearProgramResult:
    status: str  # "optimal" | "infeasible"
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None


def _pivot(T: np.ndarray, basis: List[int], r: int, c: int) -> None:
    T[r] /= T[r, c]
    for i in range(T.shape[0]):
        if i != r and T[i, c] != 0.0:
            T[i] -= T[i, c] * T[r]
    basis[r] = c


def _iterate(T: np.ndarray, basis: List[int], n_allowed: int, tol: float) -> None:
    """Primal simplex iterations with Bland's rule on a reduced-cost tableau."""
    for _ in range(MAX_PIVOTS):
        costs = T[-1, :n_allowed]
        entering = np.flatnonzero(costs < -tol)
        if entering.size == 0:
            return
        c = int(entering[0])
        column = T[:-1, c]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise UnboundedError(f"column {c} has no positive pivot")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, basis, r, c)
    raise RuntimeError("simplex did not terminate")


def _reduce_costs(T: np.ndarray, basis: List[int], cost: np.ndarray) -> None:
    T[-1, :] = 0.0
    T[-1, : cost.size] = cost
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]


def solve_standard(c: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = LP_ATOL) -> LinearProgramResult:
    """Two-phase simplex for min c·x subject to A x = b, x ≥ 0."""
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    _reduce_costs(T, basis, np.concatenate((np.zeros(n), np.ones(m))))
    _iterate(T, basis, n + m, tol)
    if -T[-1, -1] > tol:
        return LinearProgramResult("infeasible")

    # Drive artificial variables out of the basis; drop redundant rows.
    redundant = []
    for i, j in enumerate(basis):
        if j >= n:
            candidates = np.flatnonzero(np.abs(T[i, :n]) > tol)
            if candidates.size:
                _pivot(T, basis, i, int(candidates[0]))
            else:
                redundant.append(i)
    if redundant:
        T = np.delete(T, redundant, axis=0)
        basis = [j for i, j in enumerate(basis) if i not in redundant]
    T = np.delete(T, np.arange(n, n + m), axis=1)

    _reduce_costs(T, basis, c)
    _iterate(T, basis, n, tol)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = np.clip(x, 0.0, None)
    return LinearProgramResult("optimal", x, float(c @ x))


def minimize(
    c: Sequence[float],
    A_ge: np.ndarray,
    b_ge: np.ndarray,
    A_le: np.ndarray,
    b_le: np.ndarray,
    tol: float = LP_ATOL,
) -> LinearProgramResult:
    """min c·x subject to A_ge x ≥ b_ge, A_le x ≤ b_le, x ≥ 0."""
    c = np.asarray(c, dtype=np.float64)
    A_ge = np.asarray(A_ge, dtype=np.float64).reshape(-1, c.size)
    A_le = np.asarray(A_le, dtype=np.float64).reshape(-1, c.size)
    n, k_ge, k_le = c.size, A_ge.shape[0], A_le.shape[0]
    A = np.zeros((k_ge + k_le, n + k_ge + k_le))
    A[:k_ge, :n] = A_ge
    A[:k_ge, n : n + k_ge] = -np.eye(k_ge)
    A[k_ge:, :n] = A_le
    A[k_ge:, n + k_ge :] = np.eye(k_le)
    b = np.concatenate((np.asarray(b_ge, dtype=np.float64), np.asarray(b_le, dtype=np.float64)))
    cost = np.concatenate((c, np.zeros(k_ge + k_le)))
    result = solve_standard(cost, A, b, tol)
    if result.status == "optimal":
        result.x = result.x[:n]
        result.objective = float(c @ result.x)
    return result


@dataclasses.dataclass
class Allocation:
    alphas: List[float]
    taus: List[float]
    leakage_per_component: List[float]
    total_leakage_bits: float
    status: str  # "optimal" | "infeasible"
    violated_tasks: List[int] = dataclasses.field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclasses.dataclass
class MechanismBundle:
    allocation: Allocation
    solutions: List[funnel.ComponentSolution]
    product: ProductChannel
    metrics: MechanismMetrics


def _coverage(model: DataModel) -> np.ndarray:
    cover = np.zeros((len(model.tasks), model.n_components))
    for k, task in enumerate(model.tasks):
        cover[k, list(task.components)] = 1.0
    return cover


def solve_allocation(model: DataModel) -> Allocation:
    """Minimum-leakage allocation; lexicographically least α among optima."""
    n = model.n_components
    taus = np.array([funnel.threshold(c) for c in model.components])
    h_x = np.array([c.h_x for c in model.components])
    cover = _coverage(model)
    gammas = np.array(model.gammas, dtype=np.float64)

    violated = [k for k in range(len(gammas)) if gammas[k] > cover[k] @ h_x + LP_ATOL]
    if violated:
        logger.info("allocation infeasible for tasks %s", violated)
        return Allocation([], taus.tolist(), [], float("inf"), "infeasible", violated)

    # β = α − τ, 0 ≤ β ≤ H(X) − τ
    upper = h_x - taus
    need = np.minimum(gammas - cover @ taus, cover @ upper)
    ones = np.ones(n)
    first = minimize(ones, cover, need, np.eye(n), upper)
    if first.status != "optimal":
        return Allocation([], taus.tolist(), [], float("inf"), "infeasible", [])
    best = first.objective

    beta = first.x.copy()
    fixed_rows, fixed_rhs = [ones], [best + LEX_SLACK]
    for i in range(n):
        unit = np.eye(n)[i]
        lex = minimize(
            unit,
            cover,
            need,
            np.vstack([np.eye(n)] + fixed_rows),
            np.concatenate([upper, fixed_rhs]),
        )
        if lex.status != "optimal":
            logger.warning("lexicographic pass stopped at component %d", i)
            break
        # earlier coordinates keep the value of their own pass
        beta[i:] = lex.x[i:]
        fixed_rows.append(unit)
        fixed_rhs.append(float(beta[i]) + LEX_SLACK)

    beta = np.where(np.abs(beta) <= LP_ATOL, 0.0, beta)
    beta = np.where(np.abs(upper - beta) <= LP_ATOL, upper, beta)
    beta = np.clip(beta, 0.0, upper)
    alphas = taus + beta
    leakages = [funnel.funnel_leakage(a, t) for a, t in zip(alphas, taus)]
    logger.info("allocation optimal: L*=%.12g bits", sum(leakages))
    return Allocation(
        alphas=alphas.tolist(),
        taus=taus.tolist(),
        leakage_per_component=leakages,
        total_leakage_bits=float(sum(leakages)),
        status="optimal",
    )


def solve_and_synthesize(model: DataModel) -> MechanismBundle:
    """Optimal allocation plus the per-component mechanisms achieving it."""
    allocation = solve_allocation(model)
    if not allocation.optimal:
        raise InfeasibleModelError(
            f"utility targets cannot be met (tasks {allocation.violated_tasks})",
            allocation.violated_tasks,
        )
    solutions = [funnel.synthesize(c, a) for c, a in zip(model.components, allocation.alphas)]
    product = ProductChannel([s.channel for s in solutions])
    metrics = evaluate_product(model, product)

    gap = abs(metrics.leakage_bits - allocation.total_leakage_bits)
    if gap > LP_ATOL:
        raise VerificationError(f"mechanism leaks {gap:.3g} bits more than the allocation")
    short = [
        k for k, ok in enumerate(metrics.satisfied(model.gammas, LP_ATOL)) if not ok
    ]
    if short:
        raise VerificationError(f"mechanism misses utility targets of tasks {short}")
    return MechanismBundle(allocation, solutions, product, metrics)


def disjoint_task_leakage(model: DataModel) -> float:
    """Closed-form L* when no two tasks share a component."""
    seen = set()
    for task in model.tasks:
        if seen & set(task.components):
            raise ValueError("tasks are not pairwise disjoint")
        seen |= set(task.components)
    taus = [funnel.threshold(c) for c in model.components]
    return sum(
        max(0.0, model.gamma(k) - sum(taus[i] for i in task.components))
        for k, task in enumerate(model.tasks)
    )


def privacy_funnel_model(comp: ComponentModel, alpha: float) -> DataModel:
    """The classical privacy funnel: one component, the whole of X as the task."""
    return DataModel([comp], [TaskSpec((0,), gamma_bits=alpha)])
