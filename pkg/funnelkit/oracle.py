"""Brute-force cross-checks and seeded corpus generators.

The searches here are falsifiers: a sampled channel beating a closed form
disproves it, but failing to find one proves nothing. Known-good witnesses are
always evaluated alongside the random samples so that a check is never vacuous.
"""
import dataclasses
import itertools
import logging
import math
from typing import Optional

import numpy as np
import torch
from torch.distributions import Dirichlet

from . import funnel, infotheory
from .channel import constant_channel, identity_channel, push_joint, relabel_through
from .model import ComponentModel, DataModel, TaskSpec
from .types import DTYPE, LP_ATOL, CapacityError, Channel, JointTable, Labels
from .utils import seeded

logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-6
MAX_LP_COMPONENTS = 5
MAX_LP_TASKS = 4
CHUNK = 2048


@dataclasses.dataclass
class SearchConfig:
    trials: int = 10_000
    out_alphabet_size: Optional[int] = None  # defaults to |X|+1
    seed: int = 42
    dirichlet_alpha: float = 1.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.out_alphabet_size is not None and self.out_alphabet_size < 1:
            raise ValueError("out_alphabet_size must be at least 1")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")


def _witness_leakage(comp: ComponentModel, ch: Channel, alpha: float) -> float:
    joint = push_joint(comp.pmf, ch)
    if infotheory.mutual_information(joint) < alpha - FEASIBILITY_SLACK:
        return math.inf
    return infotheory.mutual_information(relabel_through(comp.private_map, joint, comp.alphabet_s))


def search_min_leakage(comp: ComponentModel, alpha: float, cfg: SearchConfig) -> float:
    """Least I(S;Y) over sampled channels with I(X;Y) ≥ alpha, in bits.

    The constant channel, the identity channel and the synthesized mechanism
    are evaluated in addition to `cfg.trials` Dirichlet-sampled channels.
    """
    witnesses = [constant_channel(comp.alphabet_x), identity_channel(comp.alphabet_x)]
    if 0.0 <= alpha <= comp.h_x:
        witnesses.append(funnel.synthesize(comp, max(alpha, funnel.threshold(comp))).channel)
    best = min(_witness_leakage(comp, ch, alpha) for ch in witnesses)

    n_y = cfg.out_alphabet_size or comp.n_x + 1
    concentration = torch.full((n_y,), cfg.dirichlet_alpha, dtype=DTYPE)
    s_index = torch.tensor(comp.private_map)
    with seeded(cfg.seed):
        for start in range(0, cfg.trials, CHUNK):
            count = min(CHUNK, cfg.trials - start)
            rows = Dirichlet(concentration).sample((count, comp.n_x))
            joints = comp.pmf[None, :, None] * rows
            info = infotheory.batched_mutual_information(joints)
            p_sy = torch.zeros(count, comp.n_s, n_y, dtype=DTYPE).index_add_(1, s_index, joints)
            leak = infotheory.batched_mutual_information(p_sy)
            feasible = info >= alpha - FEASIBILITY_SLACK
            if feasible.any():
                best = min(best, float(leak[feasible].min()))
    logger.debug("search: alpha=%.6g best leakage %.6g bits", alpha, best)
    return best


def enumerate_lp_vertices(model: DataModel) -> float:
    """Optimal allocation objective by enumerating every basic solution.

    Constraints are the task coverage rows, α ≥ τ and α ≤ H(X). Returns inf when
    no basic solution is feasible.
    """
    n, k = model.n_components, len(model.tasks)
    if n > MAX_LP_COMPONENTS or k > MAX_LP_TASKS:
        raise CapacityError(
            f"vertex enumeration is capped at {MAX_LP_COMPONENTS} components and {MAX_LP_TASKS} tasks"
        )
    taus = np.array([funnel.threshold(c) for c in model.components])
    h_x = np.array([c.h_x for c in model.components])
    # rows as G α ≥ h
    cover = np.zeros((k, n))
    for j, task in enumerate(model.tasks):
        cover[j, list(task.components)] = 1.0
    G = np.vstack([cover, np.eye(n), -np.eye(n)])
    h = np.concatenate([np.array(model.gammas, dtype=np.float64), taus, -h_x])

    best = math.inf
    for active in itertools.combinations(range(G.shape[0]), n):
        A = G[list(active)]
        if np.linalg.matrix_rank(A) < n:
            continue
        alpha = np.linalg.solve(A, h[list(active)])
        if np.all(G @ alpha >= h - LP_ATOL):
            best = min(best, float(np.sum(alpha - taus)))
    return max(best, 0.0)


def sweep_decoders(joint: JointTable, trials: int, seed: int) -> float:
    """Least expected log loss over random soft decoders plus the posterior, in bits."""
    best = infotheory.expected_log_loss(joint, infotheory.optimal_soft_decoder(joint))
    p = joint.probs.t()  # (Y, C)
    concentration = torch.ones(p.shape[1], dtype=DTYPE)
    with seeded(seed):
        for start in range(0, trials, CHUNK):
            count = min(CHUNK, trials - start)
            tables = Dirichlet(concentration).sample((count, p.shape[0]))
            terms = torch.where(p > 0, p * tables.log2(), torch.zeros_like(tables))
            best = min(best, float(-terms.sum((-2, -1)).min()))
    return best


def randint(low: int, high: int) -> int:
    return int(torch.randint(low, high + 1, ()))


def random_component(max_x: int = 6, sparse: float = 0.2) -> ComponentModel:
    """Random component from the current torch random state."""
    n_x = randint(2, max_x)
    pmf = Dirichlet(torch.ones(n_x, dtype=DTYPE)).sample()
    if n_x > 2 and float(torch.rand(())) < sparse:
        pmf[randint(0, n_x - 1)] = 0.0
        pmf = pmf / pmf.sum()
    n_s = randint(1, n_x)
    private_map = torch.cat((torch.arange(n_s), torch.randint(0, n_s, (n_x - n_s,))))
    private_map = private_map[torch.randperm(n_x)]
    return ComponentModel(
        alphabet_x=tuple(str(i) for i in range(n_x)),
        pmf=pmf,
        private_map=tuple(private_map.tolist()),
        alphabet_s=tuple(f"s{j}" for j in range(n_s)),
    )


def random_model(
    max_components: int = 3,
    max_x: int = 4,
    max_tasks: int = 3,
    cap: int = 64,
    infeasible: float = 0.0,
    tight: float = 0.0,
) -> DataModel:
    """Random model whose joint alphabet stays within `cap` symbols.

    With probability `infeasible` a task target exceeds what its components
    hold; with probability `tight` it sits exactly at Σ τ_i of the task.
    """
    components = [random_component(max_x)]
    for _ in range(randint(1, max_components) - 1):
        comp = random_component(max_x)
        if math.prod(c.n_x for c in components) * comp.n_x > cap:
            break
        components.append(comp)
    n = len(components)
    tasks = []
    for _ in range(randint(1, max_tasks)):
        members = torch.nonzero(torch.rand(n) < 0.5).flatten().tolist() or [randint(0, n - 1)]
        total = sum(components[i].h_x for i in members)
        draw = float(torch.rand(()))
        if draw < infeasible:
            gamma = total + 0.1 + float(torch.rand(()))
        elif draw < infeasible + tight:
            gamma = sum(funnel.threshold(components[i]) for i in members)
        else:
            gamma = total * float(torch.rand(()))
        tasks.append(TaskSpec(tuple(members), gamma_bits=gamma))
    return DataModel(components, tasks)


def random_channel(in_alphabet: Labels, n_out: int, concentration: float = 1.0) -> Channel:
    rows = Dirichlet(torch.full((n_out,), concentration, dtype=DTYPE)).sample((len(in_alphabet),))
    return Channel(in_alphabet, tuple(f"y{j}" for j in range(n_out)), rows)


def random_joint(n_rows: int, n_cols: int) -> JointTable:
    probs = Dirichlet(torch.ones(n_rows * n_cols, dtype=DTYPE)).sample().reshape(n_rows, n_cols)
    return JointTable(
        tuple(f"c{i}" for i in range(n_rows)), tuple(f"y{j}" for j in range(n_cols)), probs
    )

