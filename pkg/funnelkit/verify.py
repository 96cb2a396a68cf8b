"""Seeded verification suites behind `funnelkit verify`.

Every suite draws its corpus from its own seed, derived from the master seed,
so that suites can run in any order and the summary is reproducible byte for
byte.
"""
import dataclasses
import logging
import math
import os
import warnings
from pathlib import Path
from typing import Callable, Dict, List

import torch

from . import allocation, dp, frl, funnel, infotheory, oracle, parallelize
from .channel import (
    ProductChannel,
    evaluate_mechanism,
    identity_channel,
    push_joint,
    relabel_through,
)
from .model import ComponentModel, DataModel, load_model
from .types import DTYPE, Channel, JointTable
from .utils import seeded

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
SEED_ENV = "FUNNELKIT_SEED"
PARITY_MODEL = Path(__file__).parent / "examples" / "parity.json"
MAX_FAILURES = 5


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, DEFAULT_SEED))


@dataclasses.dataclass
class VerifyConfig:
    seed: int = DEFAULT_SEED
    trials: int = 10_000
    funnel_components: int = 100
    alpha_points: int = 5
    frl_joints: int = 200
    lp_models: int = 100
    parallel_pairs: int = 100
    logloss_joints: int = 100
    inject_corrupt: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.alpha_points < 2:
            raise ValueError("alpha_points must be at least 2")

    @property
    def decoder_trials(self) -> int:
        return max(1, self.trials // 10)


@dataclasses.dataclass
class SuiteResult:
    passed: bool = True
    checked: int = 0
    worst_gap: float = 0.0
    failures: List[str] = dataclasses.field(default_factory=list)

    def check(self, ok: bool, gap: float, message: str) -> None:
        """Record one property check; `gap` is its margin, positive when violated."""
        self.checked += 1
        if not math.isnan(gap):
            self.worst_gap = max(self.worst_gap, gap)
        if not ok:
            self.passed = False
            if len(self.failures) < MAX_FAILURES:
                self.failures.append(message)


def _leakage(comp: ComponentModel, ch: Channel) -> float:
    joint = push_joint(comp.pmf, ch)
    return infotheory.mutual_information(relabel_through(comp.private_map, joint, comp.alphabet_s))


def suite_funnel(cfg: VerifyConfig, seed: int) -> SuiteResult:
    result = SuiteResult()
    with seeded(seed):
        comps = [oracle.random_component(6) for _ in range(cfg.funnel_components)]
    for c, comp in enumerate(comps):
        tau = funnel.threshold(comp)
        for j in range(cfg.alpha_points):
            alpha = comp.h_x * j / (cfg.alpha_points - 1)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sol = funnel.synthesize(comp, alpha)
            info = infotheory.mutual_information(push_joint(comp.pmf, sol.channel))
            leak = _leakage(comp, sol.channel)
            closed = funnel.funnel_leakage(alpha, tau)
            result.check(info >= alpha - 1e-9, alpha - info, f"component {c}: I(X;Y)={info!r} < {alpha!r}")
            gap = abs(leak - closed)
            result.check(gap <= 1e-9, gap, f"component {c}: leakage {leak!r} != {closed!r}")
            search = oracle.SearchConfig(
                trials=cfg.trials, out_alphabet_size=comp.n_x + 1, seed=seed + 1000 * c + j
            )
            best = oracle.search_min_leakage(comp, alpha, search)
            result.check(
                best >= closed - 1e-6,
                closed - best,
                f"component {c}: search found {best!r} below {closed!r} at alpha={alpha!r}",
            )
    return result


def _random_frl_joint() -> JointTable:
    nx, nw = oracle.randint(2, 5), oracle.randint(1, 5)
    probs = torch.distributions.Dirichlet(torch.ones(nx * nw, dtype=DTYPE)).sample()
    probs = probs * (torch.rand(nx * nw) > 0.2)
    if float(probs.sum()) == 0.0:
        probs[0] = 1.0
    probs = (probs / probs.sum()).reshape(nx, nw)
    return JointTable(tuple(map(str, range(nx))), tuple(f"w{j}" for j in range(nw)), probs)


def suite_frl(cfg: VerifyConfig, seed: int) -> SuiteResult:
    result = SuiteResult()
    with seeded(seed):
        joints = [_random_frl_joint() for _ in range(cfg.frl_joints)]
        comps = [oracle.random_component(6) for _ in range(cfg.frl_joints // 4)]
    for j, joint in enumerate(joints):
        rep = frl.functional_representation(joint)
        p = joint.probs
        p_w = p.sum(0)
        live = p_w > 0
        cond = rep.conditional()
        p_xwz = p[..., None] * cond
        # Z independent of W
        p_z_w = p_xwz.sum(0)[live] / p_w[live, None]
        tv = 0.5 * float((p_z_w - rep.z_pmf).abs().sum(-1).max())
        result.check(tv <= 1e-9, tv, f"joint {j}: Z depends on W (tv={tv!r})")
        # X is a function of (W, Z)
        h = float(infotheory.entropy_bits(p_xwz.reshape(-1)) - infotheory.entropy_bits(p_xwz.sum(0).reshape(-1)))
        result.check(h <= 1e-9, h, f"joint {j}: H(X|W,Z)={h!r}")
        rebuilt = rep.band_mass()[:, live]
        err = float((rebuilt - p[:, live] / p_w[live]).abs().max())
        result.check(err <= 1e-9, err, f"joint {j}: reconstruction error {err!r}")
    for c, comp in enumerate(comps):
        ch = frl.leakage_free_privatizer(comp)
        info = infotheory.mutual_information(push_joint(comp.pmf, ch))
        gap = abs(info - funnel.threshold(comp))
        result.check(gap <= 1e-9, gap, f"component {c}: I(X;Y^f)={info!r}")
        leak = _leakage(comp, ch)
        result.check(leak <= 1e-9, leak, f"component {c}: I(S;Y^f)={leak!r}")
    return result


def suite_lp(cfg: VerifyConfig, seed: int) -> SuiteResult:
    result = SuiteResult()
    with seeded(seed):
        models = [
            oracle.random_model(
                max_components=5, max_x=3, max_tasks=4, cap=10**6, infeasible=0.15, tight=0.2
            )
            for _ in range(cfg.lp_models)
        ]
    for m, model in enumerate(models):
        alloc = allocation.solve_allocation(model)
        brute = oracle.enumerate_lp_vertices(model)
        if not alloc.optimal or math.isinf(brute):
            same = alloc.optimal == (not math.isinf(brute))
            result.check(same, 0.0 if same else math.inf, f"model {m}: status {alloc.status} vs enumeration {brute!r}")
            continue
        gap = abs(alloc.total_leakage_bits - brute)
        result.check(gap <= 1e-9, gap, f"model {m}: simplex {alloc.total_leakage_bits!r} vs {brute!r}")
        for i, (a, tau, comp) in enumerate(zip(alloc.alphas, alloc.taus, model.components)):
            inside = tau - 1e-9 <= a <= comp.h_x + 1e-9
            result.check(inside, 0.0 if inside else 1.0, f"model {m}: alpha[{i}]={a!r} out of range")
    return result


def _parallel_corpus(cfg: VerifyConfig, seed: int):
    with seeded(seed):
        pairs = []
        for _ in range(cfg.parallel_pairs):
            model = oracle.random_model(max_components=3, max_x=4, max_tasks=3, cap=64)
            ch = oracle.random_channel(model.alphabet.labels, oracle.randint(2, 4))
            pairs.append((model, ch))
    return pairs


def _suite_parallel(cfg: VerifyConfig, seed: int, transform: Callable) -> SuiteResult:
    result = SuiteResult()
    for p, (model, ch) in enumerate(_parallel_corpus(cfg, seed)):
        _, report = transform(model, ch)
        d = report.deltas
        worst = max(
            [abs(d["leakage_bits"] if report.construction == "privatization" else d["rate_bits"])]
            + [-u for u in d["utility_bits"]]
            + [report.independence_gap or 0.0]
        )
        result.check(report.ok, worst, f"pair {p}: {report.construction} deltas {d}")
    return result


def suite_parallelization(cfg: VerifyConfig, seed: int) -> SuiteResult:
    return _suite_parallel(cfg, seed, parallelize.parallelize_privatization)


def suite_compression(cfg: VerifyConfig, seed: int) -> SuiteResult:
    return _suite_parallel(cfg, seed, parallelize.parallelize_compression)


def suite_logloss(cfg: VerifyConfig, seed: int) -> SuiteResult:
    result = SuiteResult()
    with seeded(seed):
        joints = [
            oracle.random_joint(oracle.randint(2, 4), oracle.randint(2, 4))
            for _ in range(cfg.logloss_joints)
        ]
    for j, joint in enumerate(joints):
        h = infotheory.conditional_entropy(joint)
        loss = infotheory.expected_log_loss(joint, infotheory.optimal_soft_decoder(joint))
        result.check(abs(loss - h) <= 1e-12, abs(loss - h), f"joint {j}: posterior loss {loss!r} vs {h!r}")
        best = oracle.sweep_decoders(joint, cfg.decoder_trials, seed + j)
        result.check(best >= h - 1e-9, h - best, f"joint {j}: decoder below H(C|Y) ({best!r} < {h!r})")
    return result


def randomized_response_model() -> DataModel:
    comp = ComponentModel(("0", "1"), [0.5, 0.5], (0, 1), ("0", "1"))
    return DataModel([comp], [])


def randomized_response(flip: float) -> Channel:
    rows = torch.tensor([[1 - flip, flip], [flip, 1 - flip]], dtype=DTYPE)
    return Channel(("0", "1"), ("0", "1"), rows)


def suite_dp(cfg: VerifyConfig, seed: int) -> SuiteResult:
    result = SuiteResult()
    eps = dp.epsilon(randomized_response_model(), randomized_response(0.25)).epsilon_nats
    gap = abs(eps - math.log(3.0))
    result.check(gap <= 1e-9, gap, f"randomized response epsilon {eps!r}")
    for p, (model, ch) in enumerate(_parallel_corpus(cfg, seed)):
        original, parallel, ok = dp.verify_dp_parallelization(model, ch)
        margin = parallel.epsilon_nats - original.epsilon_nats
        result.check(ok, 0.0 if math.isnan(margin) else margin, f"pair {p}: epsilon grew {original.epsilon_nats!r} -> {parallel.epsilon_nats!r}")
        group = dp.group_property_gap(model, ch, seed=seed + p)
        result.check(group <= 1e-9, group, f"pair {p}: group property gap {group!r}")
        # factor-wise epsilon of a product agrees with the materialized product
        with seeded(seed + p):
            factors = [oracle.random_channel(c.alphabet_x, 2) for c in model.components]
        product = ProductChannel(factors)
        direct = dp.epsilon(model, product.materialize()).epsilon_nats
        factored = dp.epsilon_product(model, product).epsilon_nats
        diff = abs(direct - factored) if math.isfinite(direct) else (0.0 if direct == factored else math.inf)
        result.check(diff <= 1e-9, diff, f"pair {p}: product epsilon {direct!r} vs {factored!r}")
    return result


def suite_worked_example(cfg: VerifyConfig, seed: int) -> SuiteResult:
    result = SuiteResult()
    model = load_model(PARITY_MODEL)
    bundle = allocation.solve_and_synthesize(model)
    alloc = bundle.allocation
    gap = abs(alloc.total_leakage_bits - 0.5)
    result.check(gap <= 1e-9, gap, f"L*={alloc.total_leakage_bits!r}, expected 0.5")
    gap = max(abs(a - b) for a, b in zip(alloc.alphas, (1.5, 1.0)))
    result.check(gap <= 1e-9, gap, f"alphas={alloc.alphas!r}, expected (1.5, 1.0)")
    channel = bundle.product.materialize()
    if cfg.inject_corrupt:
        logger.warning("replacing the worked-example mechanism by the identity channel")
        channel = identity_channel(channel.in_alphabet)
    metrics = evaluate_mechanism(model, channel)
    gap = abs(metrics.leakage_bits - alloc.total_leakage_bits)
    result.check(gap <= 1e-9, gap, f"evaluated leakage {metrics.leakage_bits!r} != L*")
    return result


SUITES: Dict[str, Callable[[VerifyConfig, int], SuiteResult]] = {
    "funnel": suite_funnel,
    "frl": suite_frl,
    "lp": suite_lp,
    "parallelization": suite_parallelization,
    "compression": suite_compression,
    "logloss": suite_logloss,
    "dp": suite_dp,
    "worked_example": suite_worked_example,
}


def run_suites(cfg: VerifyConfig, names: List[str] = None) -> dict:
    """Run the named suites (all by default) and summarize pass/fail per suite."""
    names = list(SUITES) if names is None else names
    summary = {}
    for offset, name in enumerate(SUITES):
        if name not in names:
            continue
        logger.info("running suite %s", name)
        result = SUITES[name](cfg, cfg.seed + 7919 * offset)
        logger.info("suite %s: %s (%d checks)", name, "pass" if result.passed else "FAIL", result.checked)
        summary[name] = dataclasses.asdict(result)
    return {
        "seed": cfg.seed,
        "trials": cfg.trials,
        "passed": all(s["passed"] for s in summary.values()),
        "suites": summary,
    }
