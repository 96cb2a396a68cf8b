"""Command line interface.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 infeasible
utility targets. Machine-readable output goes to stdout or files, logs to
stderr.
"""
import argparse
import concurrent.futures
import csv
import dataclasses
import json
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import allocation, dp, funnel, parallelize, verify
from .__version__ import __version__
from .channel import channel_to_dict, evaluate_mechanism, load_channel
from .model import DataModel, load_model, scaled, with_gammas
from .types import (
    MAX_JOINT_SYMBOLS,
    AlphabetMismatchError,
    CapacityError,
    InfeasibleModelError,
    InvalidDistributionError,
    ModelError,
    UnachievableAlphaError,
    VerificationError,
)
from .utils import jsonable, round_sig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

INPUT_ERRORS = (
    ModelError,
    InvalidDistributionError,
    AlphabetMismatchError,
    CapacityError,
    UnachievableAlphaError,
    OSError,
)


@dataclasses.dataclass
class SweepRow:
    scale: float
    L_star_bits: float
    feasible: bool
    slack: List[float]


def _dump(obj, path: Optional[Path] = None) -> None:
    text = json.dumps(jsonable(obj), indent=2, sort_keys=True)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_analyze(args) -> int:
    model = load_model(args.model, check=False)
    components = [
        {
            "h_x_bits": c.h_x,
            "h_s_bits": c.h_s,
            "tau_bits": funnel.threshold(c),
            "alphabet_size": c.n_x,
            "private_alphabet_size": c.n_s,
        }
        for c in model.components
    ]
    tasks = []
    for k, task in enumerate(model.tasks):
        gamma, h = model.gamma(k), model.task_entropy(k)
        tasks.append(
            {
                "components": list(task.components),
                "gamma_bits": gamma,
                "entropy_bits": h,
                "leakage_free_bits": sum(funnel.threshold(model.components[i]) for i in task.components),
                "feasible": -1e-9 <= gamma <= h + 1e-9,
            }
        )
    _dump(
        {
            "components": components,
            "tasks": tasks,
            "joint_symbols": math.prod(c.n_x for c in model.components),
        }
    )
    return EXIT_OK


def _bundle_dict(bundle: allocation.MechanismBundle) -> Dict:
    out = {
        "allocation": bundle.allocation,
        "metrics": bundle.metrics,
        "components": [
            {
                "alpha_bits": s.alpha_bits,
                "tau_bits": s.tau_bits,
                "leakage_bits": s.leakage_bits,
                "mix_p": s.mix_p,
                "channel": channel_to_dict(s.channel),
            }
            for s in bundle.solutions
        ],
    }
    size = bundle.product.output_size()
    if size <= MAX_JOINT_SYMBOLS:
        out.update(channel_to_dict(bundle.product.materialize()))
    else:
        warnings.warn(
            f"product channel has {size} outputs; only per-component channels are written"
        )
    return out


def cmd_solve(args) -> int:
    model = load_model(args.model)
    alloc = allocation.solve_allocation(model)
    if not alloc.optimal:
        _dump(alloc)
        logger.error("infeasible utility targets for tasks %s", alloc.violated_tasks)
        return EXIT_INFEASIBLE
    if args.emit_mechanism:
        bundle = allocation.solve_and_synthesize(model)
        _dump(_bundle_dict(bundle), args.emit_mechanism)
        logger.info("wrote mechanism to %s", args.emit_mechanism)
    _dump(alloc)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    ch = load_channel(args.channel)
    metrics = evaluate_mechanism(model, ch)
    report = dp.epsilon(model, ch)
    _dump(
        {
            "metrics": metrics,
            "satisfied": metrics.satisfied(model.gammas),
            "rate_bits": metrics.rate_bits,
            "epsilon_nats": report.epsilon_nats,
        }
    )
    return EXIT_OK


def parse_scales(text: str) -> List[float]:
    """`a:b:step` inclusive of b, or a comma separated list."""
    if ":" not in text:
        return [float(v) for v in text.split(",")]
    a, b, step = (float(v) for v in text.split(":"))
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"invalid scale range {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [a + i * step for i in range(count)]


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def parse_gamma(text: str):
    try:
        k, v = text.split("=", 1)
        return int(k), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k=value, got {text!r}")


def sweep_row(model: DataModel, scale: float) -> SweepRow:
    target = scaled(model, scale)
    alloc = allocation.solve_allocation(target)
    if not alloc.optimal:
        return SweepRow(scale, math.inf, False, [])
    slack = [
        sum(alloc.alphas[i] for i in task.components) - target.gamma(k)
        for k, task in enumerate(target.tasks)
    ]
    return SweepRow(scale, alloc.total_leakage_bits, True, slack)


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    if args.gamma:
        gammas = model.gammas
        for k, v in args.gamma:
            if not 0 <= k < len(gammas):
                raise ModelError(f"--gamma refers to unknown task {k}")
            gammas[k] = v
        model = with_gammas(model, gammas)
    if any(s < 0 for s in args.scales):
        raise ModelError("scales must be non-negative")
    with concurrent.futures.ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda s: sweep_row(model, s), args.scales))
    rows.sort(key=lambda r: r.scale)

    with open(args.out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["scale", "L_star_bits", "feasible"] + [f"slack_{k}" for k in range(len(model.tasks))]
        )
        for r in rows:
            slack = [round_sig(v) for v in r.slack] or [""] * len(model.tasks)
            writer.writerow([round_sig(r.scale), round_sig(r.L_star_bits), str(r.feasible).lower()] + slack)
    logger.info("wrote %d sweep rows to %s", len(rows), args.out)
    return EXIT_OK


def cmd_parallelize(args) -> int:
    model = load_model(args.model)
    ch = load_channel(args.channel)
    if args.compression:
        product, report = parallelize.parallelize_compression(model, ch)
    elif args.private_prefix:
        product, report = parallelize.parallelize_private_prefix(model, ch)
    else:
        product, report = parallelize.parallelize_privatization(model, ch)
    if args.out:
        _dump({"factors": [channel_to_dict(f) for f in product.factors]}, args.out)
    _dump(report)
    if args.private_prefix:
        return EXIT_OK
    return EXIT_OK if report.ok else EXIT_VERIFICATION


def cmd_dp_eps(args) -> int:
    model = load_model(args.model)
    ch = load_channel(args.channel)
    if args.parallelized:
        original, parallel, ok = dp.verify_dp_parallelization(model, ch)
        _dump({"original": original, "parallelized": parallel, "ok": ok, "units": "nats"})
        return EXIT_OK if ok else EXIT_VERIFICATION
    _dump({**dataclasses.asdict(dp.epsilon(model, ch)), "units": "nats"})
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = verify.default_seed() if args.seed is None else args.seed
    cfg = verify.VerifyConfig(seed=seed, trials=args.trials, inject_corrupt=args.inject_corrupt)
    summary = verify.run_suites(cfg, args.suite)
    _dump(summary)
    return EXIT_OK if summary["passed"] else EXIT_VERIFICATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funnelkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="entropies, thresholds and feasibility of a model")
    p.add_argument("model", type=Path)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("solve", help="minimum-leakage allocation")
    p.add_argument("model", type=Path)
    p.add_argument("--emit-mechanism", type=Path, metavar="OUT")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("eval", help="metrics of a mechanism over the model")
    p.add_argument("model", type=Path)
    p.add_argument("channel", type=Path)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="L* as all utility targets are scaled")
    p.add_argument("model", type=Path)
    p.add_argument("--scales", type=parse_scales, required=True, help="a:b:step or a,b,...")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gamma", type=parse_gamma, action="append", metavar="K=V")
    p.add_argument("--workers", type=positive_int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("parallelize", help="product form of a joint mechanism")
    p.add_argument("model", type=Path)
    p.add_argument("channel", type=Path)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--compression", action="store_true")
    group.add_argument("--private-prefix", action="store_true")
    p.add_argument("--out", type=Path, help="write the per-component channels")
    p.set_defaults(fn=cmd_parallelize)

    p = sub.add_parser("dp-eps", help="differential-privacy epsilon w.r.t. the private vector")
    p.add_argument("model", type=Path)
    p.add_argument("channel", type=Path)
    p.add_argument("--parallelized", action="store_true")
    p.set_defaults(fn=cmd_dp_eps)

    p = sub.add_parser("verify", help="run the seeded verification suites")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=positive_int, default=10_000)
    p.add_argument("--suite", action="append", choices=sorted(verify.SUITES))
    p.add_argument("--inject-corrupt", action="store_true")
    p.set_defaults(fn=cmd_verify)
    return parser


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.fn(args)
    except InfeasibleModelError as e:
        logger.error("%s", e)
        return EXIT_INFEASIBLE
    except VerificationError as e:
        logger.error("%s", e)
        return EXIT_VERIFICATION
    except INPUT_ERRORS as e:
        logger.error("%s", e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
