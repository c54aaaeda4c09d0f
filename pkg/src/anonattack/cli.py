"""Command-line entry point: ``anonattack <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import anatomy, definetti, harness
from .dataset import load_dataset
from .errors import ConfigError, DataError
from .mechanism import MECHANISMS, PrivacyParams, verify_dp_ratio

log = logging.getLogger("anonattack")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(require_config: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, required=require_config, help="experiment or dataset YAML")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output path (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anonattack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack-dp", parents=[_common()], help="naive attack on noisy counts")
    p.add_argument("--epsilon", type=_floats, help="comma-separated epsilon grid")
    p.add_argument("--mechanism", choices=MECHANISMS)
    p.add_argument("--reps", type=int)
    p.add_argument("--timing", action="store_true", help="fill the seconds column")

    p = sub.add_parser("anonymize", parents=[_common()], help="write an Anatomy release")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--merge-factor", type=int, default=1)
    p.add_argument("--no-truth", action="store_true", help="omit truth.csv")

    p = sub.add_parser("attack-definetti", parents=[_common()], help="deFinetti attack on Anatomy releases")
    p.add_argument("--l", type=_ints, help="comma-separated l values")
    p.add_argument("--merge-factor", type=_ints, help="comma-separated merge factors")
    p.add_argument("--iterations", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--method", action="append", choices=definetti.METHODS,
                   help="prediction method (repeatable; default all)")
    p.add_argument("--trace-out", type=Path, help="write per-sweep L1 distances here")
    p.add_argument("--timing", action="store_true", help="fill the seconds column")

    p = sub.add_parser("verify-dp", help="largest probability ratio of the geometric mechanism")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--sensitivity", type=int, default=1)
    p.add_argument("--max-shift", type=int)
    p.add_argument("--z-range", type=int, default=40)

    p = sub.add_parser("summarize", help="min/mean/max per grid point of a results CSV")
    p.add_argument("results", type=Path)
    p.add_argument("--out", type=Path)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        log.info("wrote %s", out)


def _attack_dp(args) -> None:
    cfg = harness.load_experiment_config(
        args.config, seed=args.seed, out=args.out, epsilons=args.epsilon,
        mechanism=args.mechanism, repetitions=args.reps, timing=args.timing or None,
    )
    _emit(harness.rows_to_csv(harness.run_naive_attack(cfg)), cfg.out)


def _attack_definetti(args) -> None:
    cfg = harness.load_experiment_config(
        args.config, seed=args.seed, out=args.out, l_values=args.l, merge_factors=args.merge_factor,
        iterations=args.iterations, window=args.window, definetti_repetitions=args.reps,
        methods=args.method, timing=args.timing or None,
    )
    traces = {} if args.trace_out else None
    rows = harness.run_definetti_attack(cfg, traces)
    _emit(harness.rows_to_csv(rows), cfg.out)
    if traces is not None:
        lines = ["merge_factor,l,rep,iteration,l1"]
        for (f, l, rep), series in sorted(traces.items()):
            lines += [f"{f},{l},{rep},{t},{v!r}" for t, v in enumerate(series.tolist())]
        _emit("\n".join(lines) + "\n", args.trace_out)


def _anonymize(args) -> None:
    cfg = harness.load_experiment_config(args.config, seed=args.seed)
    if args.out is None:
        raise ConfigError("anonymize needs --out DIR")
    train, _ = load_dataset(cfg.schema_dataset, cfg.seed)
    rel = anatomy.anonymize(train, args.l, harness.derive_rng(cfg.seed, "anatomy", args.l, 0))
    rel = anatomy.merge_groups(rel, args.merge_factor)
    anatomy.write_release(rel, args.out, include_truth=not args.no_truth)
    log.info("%d rows in %d groups", rel.n, rel.n_groups)


def _verify_dp(args) -> None:
    params = PrivacyParams(args.epsilon, args.sensitivity)
    shift = args.sensitivity if args.max_shift is None else args.max_shift
    ratio = verify_dp_ratio(params, shift, args.z_range)
    bound = float(np.exp(args.epsilon))
    ok = ratio <= bound * (1 + 1e-9)
    print(f"max_ratio={ratio!r} exp_epsilon={bound!r} {'ok' if ok else 'VIOLATED'}")
    if not ok:
        raise DataError("privacy ratio exceeds exp(epsilon)")


def _summarize(args) -> None:
    _emit(harness.summary_to_csv(harness.summarize(harness.read_results(args.results))), args.out)


COMMANDS = {
    "attack-dp": _attack_dp,
    "attack-definetti": _attack_definetti,
    "anonymize": _anonymize,
    "verify-dp": _verify_dp,
    "summarize": _summarize,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
