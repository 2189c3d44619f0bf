"""``hlps`` command line: train, eval, selftest, transfer, dump, ablate, layouts.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 tolerance or acceptance failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import ablation
from ._paths import default_out_dir
from .envs import print_all_layouts
from .errors import ConfigError, HLPSError
from .plotting import plot_latent_trajectories
from .selftest import run_selftest
from .trainer import (
    MANIFEST_FILE,
    RandomPolicy,
    StraightLinePolicy,
    Trainer,
    UpdateCounters,
    aggregate,
    apply_overrides,
    evaluate,
    load_config,
    numpy_stream,
    read_metrics,
    run_many,
    run_training,
    stored_config,
    write_aggregate,
)
from .trainer.config import TrainConfig
from .trainer.metrics import AGGREGATE_FILE, METRICS_FILE

logger = logging.getLogger("hlps.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_TOLERANCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here usage errors are exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_seeds(text: str) -> list[int]:
    """'0..9' (inclusive range), '0,2,5' or a single seed."""
    try:
        if ".." in text:
            start, stop = (int(v) for v in text.split("..", 1))
            if stop < start:
                raise ValueError
            return list(range(start, stop + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"invalid seed list '{text}', expected e.g. 0..9 or 0,1,2") from None


def _config_from_args(args) -> TrainConfig:
    overrides = list(args.override)
    if getattr(args, "seed", None) is not None:
        overrides.append(f"train.seed={args.seed}")
    if getattr(args, "steps", None) is not None:
        overrides.append(f"train.total_steps={args.steps}")
    return load_config(args.config, overrides)


def _run_name(args) -> str:
    return Path(args.config).stem if args.config else "default"


def cmd_train(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out) if args.out else default_out_dir() / _run_name(args)
    if args.seeds:
        seeds = parse_seeds(args.seeds)
        jobs = [(config.replace(seed=seed), out / f"seed_{seed}") for seed in seeds]
        results = run_many(jobs, workers=args.workers)
        finished = [r for r in results if not r.failed]
        rows = aggregate(read_metrics(Path(r.run_dir) / METRICS_FILE) for r in finished)
        write_aggregate(out / AGGREGATE_FILE, rows)
        for r in results:
            status = f"FAILED ({r.error})" if r.failed else f"final success {r.final_success}"
            print(f"seed {r.seed}: {status}")
        updates = sum((UpdateCounters(*r.updates) for r in finished), UpdateCounters())
        print(f"updates over {len(finished)} finished seeds: {updates}")
        if rows:
            last = rows[-1]
            print(f"step {last.step}: success {last.mean:.3f} (95% CI {last.ci_low:.3f} .. {last.ci_high:.3f}, n={last.n})")
        print(f"aggregate written to {out / AGGREGATE_FILE}")
        return EXIT_RUNTIME if len(finished) < len(results) else EXIT_OK

    result = run_training(config, out, progress=args.progress)
    if result.failed:
        print(f"training failed: {result.error}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"run directory: {out}")
    print(f"steps: {result.steps}, final success rate: {result.final_success}")
    UpdateCounters(*result.updates).display()
    return EXIT_OK


def _load_trainer(args) -> Trainer:
    config = stored_config(args.checkpoint)
    if args.override:
        config = TrainConfig.from_dict(apply_overrides(config.to_dict(), args.override))
    return Trainer.load(args.checkpoint, config)


def cmd_eval(args) -> int:
    if args.scripted or args.random:
        config = load_config(args.config, args.override)
        env_config = dataclasses.replace(config.env, goal_sampling="fixed", start_sampling="fixed")
        rng = numpy_stream(args.seed, "eval")
        policy = StraightLinePolicy() if args.scripted else RandomPolicy(numpy_stream(args.seed, "explore"))
        result = evaluate(policy, env_config, args.episodes or config.eval_episodes, rng)
    else:
        if args.checkpoint is None:
            raise ConfigError("eval needs --checkpoint (or --scripted / --random)")
        trainer = _load_trainer(args)
        result = trainer.evaluate(args.episodes)
    print(f"{result.success_rate}")
    logger.info("mean return %.3f over %d episodes", result.mean_return, len(result.successes))
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest(cases=args.cases, grad_cases=args.grad_cases, seed=args.seed, sigma0=args.sigma0_variant)
    for result in results:
        print(result.summary())
    if all(r.passed for r in results):
        print("all suites passed")
        return EXIT_OK
    print(f"self-test failed (seed {args.seed}; replay a case with --seed {args.seed} and its case number)", file=sys.stderr)
    return EXIT_TOLERANCE


def cmd_transfer(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out) if args.out else default_out_dir() / f"{_run_name(args)}_transfer"
    result = run_training(config, out, progress=args.progress, source=args.checkpoint)
    if result.failed:
        print(f"transfer run failed: {result.error}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"run directory: {out}")
    print(f"steps: {result.steps}, final success rate: {result.final_success}")
    return EXIT_OK


def cmd_dump(args) -> int:
    trainer = _load_trainer(args)
    out = Path(args.out) if args.out else Path(args.checkpoint).with_name("latents.jsonl")
    rows = trainer.dump(out, episodes=args.episodes)
    svg = plot_latent_trajectories(out, k=trainer.config.k)
    print(f"{rows} rows written to {out}")
    print(f"scatter written to {svg}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    base = _config_from_args(args)
    seeds = parse_seeds(args.seeds)
    variants = args.variants.split(",") if args.variants else list(ablation.STANDARD_VARIANTS)
    specs = ablation.specs_from_overrides(base, seeds, variants, noise=args.noise_sweep, window=args.window_sweep)
    out = Path(args.out) if args.out else default_out_dir() / f"{_run_name(args)}_ablation"
    if args.table_only:
        table = ablation.build_table(specs, out)
        table.write(out)
    else:
        table = ablation.run_ablation(specs, out, workers=args.workers)
    print(table.to_markdown())
    return EXIT_TOLERANCE if table.failed else EXIT_OK


def cmd_layouts(args) -> int:
    print_all_layouts()
    return EXIT_OK


def _add_config_args(parser: argparse.ArgumentParser, with_steps: bool = True) -> None:
    parser.add_argument("--config", help="TOML config file (defaults when omitted)")
    parser.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value, e.g. env.noise_sigma=0.15 (repeatable)")
    parser.add_argument("--seed", type=int, help="shortcut for --override train.seed=N")
    if with_steps:
        parser.add_argument("--steps", type=int, help="shortcut for --override train.total_steps=N")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hlps", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one seed, or fan out with --seeds")
    _add_config_args(p)
    p.add_argument("--seeds", help="seed list for independent runs, e.g. 0..9")
    p.add_argument("--workers", type=int, default=1, help="parallel processes for --seeds")
    p.add_argument("--out", help=f"run directory (default: $HLPS_OUT_DIR/<config name>, manifest in {MANIFEST_FILE})")
    p.add_argument("--progress", action="store_true", help="show a progress bar")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (or a scripted/random policy)")
    p.add_argument("--checkpoint")
    p.add_argument("--episodes", type=int)
    p.add_argument("--scripted", action="store_true", help="straight-to-goal controller instead of a checkpoint")
    p.add_argument("--random", action="store_true", help="uniform random actions instead of a checkpoint")
    p.add_argument("--config", help="config for --scripted / --random")
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--seed", type=int, default=0, help="evaluation seed for --scripted / --random")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="exactness, kernel and gradient oracle suites")
    p.add_argument("--cases", type=int, default=1000, help="cases for the equivalence and kernel suites")
    p.add_argument("--grad-cases", type=int, default=100, help="cases for each gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma0-variant", default="derived", choices=["derived", "printed"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("transfer", help="initialise from a source checkpoint and train on a target config")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True, help="source checkpoint")
    p.add_argument("--out")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("dump", help="latent trajectories as JSON lines plus an SVG scatter")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--out", help="JSON-lines path (default: latents.jsonl next to the checkpoint)")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("ablate", help="variants × seeds comparison table")
    _add_config_args(p)
    p.add_argument("--seeds", default="0..4")
    p.add_argument("--variants", help=f"comma-separated subset of {','.join(ablation.STANDARD_VARIANTS)}")
    p.add_argument("--noise-sweep", action="store_true", help="one row per noise level in {0, 0.1, 0.15}")
    p.add_argument("--window-sweep", action="store_true", help="one row per window size T in {1, 3, 5}")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--table-only", action="store_true", help="rebuild the table from stored metrics without training")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("layouts", help="list registered maze layouts")
    p.set_defaults(func=cmd_layouts)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hlps {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HLPSError, OSError) as exc:
        print(f"hlps {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
