"""Command-line interface.

Subcommands: ``simulate`` (write a trajectory CSV), ``fit`` (fit the
estimator on a trajectory CSV and print the value), ``experiment`` (run a
configured sweep), ``oracle`` (Monte-Carlo/symmetry policy value), and
``kappa`` (distribution-shift diagnostic).  Results go to stdout, logs and
errors to stderr; exit codes are 0 (success), 1 (usage or config error),
2 (runtime failure).
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .basis import BSplineFeatures, FeatureMap
from .envs import (
    TrajectoryBatch,
    derive_seed,
    make_spline_env,
    simulate,
    target_policy,
)
from .experiments import (
    ExperimentConfig,
    MonteCarloOracle,
    aggregate,
    run,
    summary_to_text,
    true_value,
    write_records_csv,
)
from .fqe import FittedQEvaluation
from .mis import kappa_hat
from .quadrature import QuadratureRule
from .regression import FixedRidge, TraceScaledRidge
from .selection import parse_k_rule

__all__ = ["main", "entry_point"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_env_option(parser):
    parser.add_argument("--env", default="paper", choices=["paper"],
                        help="environment preset")


def build_parser():
    parser = _Parser(prog="fqeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate episodes and write a trajectory CSV")
    _add_env_option(p)
    p.add_argument("--policy", default="behavior", choices=["behavior", "a", "b", "c"])
    p.add_argument("--n", type=int, required=True, help="episode count")
    p.add_argument("--T", type=int, required=True, help="horizon")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("fit", help="fit on a trajectory CSV; print the value estimate")
    _add_env_option(p)
    p.add_argument("--data", required=True, help="trajectory CSV from `simulate`")
    p.add_argument("--policy", required=True, choices=["a", "b", "c", "behavior"])
    p.add_argument("--k", default="loocv",
                   help="basis-size rule: an integer, rot:C[:EXP], or loocv")
    p.add_argument("--lambda", dest="ridge", default=None,
                   help="ridge level (float); default scales with the Gram trace")
    p.add_argument("--quad-nodes", type=int, default=201)
    p.add_argument("--out", default=None, help="write the fitted model JSON here")

    p = sub.add_parser("experiment", help="run a configured experiment sweep")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--workers", type=int, default=None, help="override config workers")
    p.add_argument("--out", default=None, help="override config output CSV path")

    p = sub.add_parser("oracle", help="print a policy's oracle value and standard error")
    _add_env_option(p)
    p.add_argument("--policy", required=True, choices=["a", "b", "c", "behavior"])
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--episodes", type=int, default=10**6)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("kappa", help="print the distribution-shift diagnostic")
    _add_env_option(p)
    p.add_argument("--policy", required=True, choices=["a", "b", "c", "behavior"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="basis size per step")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lambda", dest="ridge", default=None)
    return parser


def _ridge_rule(text):
    if text is None:
        return TraceScaledRidge()
    return FixedRidge(value=float(text))


def _cmd_simulate(args):
    env = make_spline_env(horizon=args.T)
    policy = target_policy(args.policy, env)
    batch = simulate(env, policy, args.n, args.seed)
    batch.to_csv(args.out)
    return 0


def _cmd_fit(args):
    batch = TrajectoryBatch.from_csv(args.data)
    env = make_spline_env(horizon=batch.horizon)
    policy = target_policy(args.policy, env)
    model = FittedQEvaluation(
        policy=policy,
        k_rule=parse_k_rule(args.k),
        ridge=_ridge_rule(args.ridge),
        quad_nodes=args.quad_nodes,
    )
    model.fit(batch, env)
    value = model.estimate_value(QuadratureRule(args.quad_nodes))
    if args.out:
        model.to_json(args.out)
    print(f"{value:.17g}")
    return 0


def _cmd_experiment(args):
    config = ExperimentConfig.from_json(args.config)
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["output"] = args.out
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    records = run(config)
    if not config.output:
        write_records_csv(records, "results.csv")
        print("results written to results.csv", file=sys.stderr)
    sys.stdout.write(summary_to_text(aggregate(records)))
    return 0


def _cmd_oracle(args):
    env = make_spline_env(horizon=args.T)
    policy = target_policy(args.policy, env)
    value, se = true_value(
        env, policy, MonteCarloOracle(episodes=args.episodes, seed=args.seed)
    )
    print(f"{value:.17g} {se:.17g}")
    return 0


def _cmd_kappa(args):
    env = make_spline_env(horizon=args.T)
    target = target_policy(args.policy, env)
    behavior = target_policy("behavior", env)
    b_batch = simulate(env, behavior, args.n, derive_seed(args.seed, "behavior"))
    pi_batch = simulate(env, target, args.n, derive_seed(args.seed, "target"))
    feature_maps = [
        FeatureMap(
            BSplineFeatures(n_basis=args.k).fit(b_batch.states[:, t]), env.n_actions
        )
        for t in range(args.T)
    ]
    value = kappa_hat(pi_batch, b_batch, feature_maps, _ridge_rule(args.ridge))
    print(f"{value:.17g}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "experiment": _cmd_experiment,
    "oracle": _cmd_oracle,
    "kappa": _cmd_kappa,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, TypeError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures (singular fits, I/O mid-run)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
