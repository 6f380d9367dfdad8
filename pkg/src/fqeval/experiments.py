"""Replicated experiment harness: sweeps (policy, n, T) grids, fits the
estimator per replicate, and persists per-replicate error records.

Child seeds derive deterministically from the base seed and the grid cell,
so enlarging a grid never changes existing cells and reruns of the same
config reproduce the results file byte for byte.  Replicate wall times are
measured and kept on the in-memory records but written as 0 in the CSV,
which keeps the file deterministic.
"""
from __future__ import annotations

import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .envs import (
    SplineDynamicsEnv,
    UniformRandomPolicy,
    derive_seed,
    episode_returns,
    make_spline_env,
    simulate,
    target_policy,
)
from .fqe import FittedQEvaluation
from .quadrature import MonteCarloRule, QuadratureRule
from .regression import (
    FixedRidge,
    LoocvUndefinedError,
    SingularDesignError,
    TraceScaledRidge,
)
from .selection import FixedK, LoocvK, RuleOfThumbK, k_rule_label
from .validation import check_positive_int, check_seed

__all__ = [
    "SymmetryZeroOracle",
    "MonteCarloOracle",
    "AutoOracle",
    "ExperimentConfig",
    "ExperimentRecord",
    "true_value",
    "run",
    "aggregate",
    "write_records_csv",
    "write_summary_csv",
    "summary_to_text",
]

RESULTS_HEADER = [
    "policy",
    "n",
    "T",
    "k_rule",
    "k_mean",
    "replicate",
    "nu_hat",
    "nu_true",
    "abs_error",
    "seed",
    "wall_time_ms",
    "status",
    "reason",
]
SUMMARY_HEADER = ["policy", "n", "T", "mean", "median", "q10", "q90", "failures"]

_FLOAT_FMT = "{:.17g}"


@dataclass(frozen=True)
class SymmetryZeroOracle:
    """Exact zero value; valid only for the uniform policy on the spline env."""


@dataclass(frozen=True)
class MonteCarloOracle:
    episodes: int = 10**6
    seed: int = 20260801


@dataclass(frozen=True)
class AutoOracle:
    """Symmetry-zero where it applies, Monte Carlo everywhere else."""

    episodes: int = 10**6
    seed: int = 20260801


def true_value(env, policy, oracle):
    """Oracle policy value and its standard error.

    The symmetry oracle returns (0, 0) exactly; it is only valid for the
    uniform-random policy on the sign-flip spline environment, where rewards
    at every step have conditional mean zero.  The Monte-Carlo oracle
    averages total rewards over fresh target-policy episodes.
    """
    if isinstance(oracle, AutoOracle):
        if _symmetry_applies(env, policy):
            oracle = SymmetryZeroOracle()
        else:
            oracle = MonteCarloOracle(episodes=oracle.episodes, seed=oracle.seed)
    if isinstance(oracle, SymmetryZeroOracle):
        if not _symmetry_applies(env, policy):
            raise ValueError(
                "the symmetry oracle requires the uniform policy on the "
                "spline environment"
            )
        return 0.0, 0.0
    if isinstance(oracle, MonteCarloOracle):
        m = check_positive_int(oracle.episodes, "episodes")
        seed = derive_seed(oracle.seed, "oracle", getattr(policy, "name", ""), env.horizon)
        totals = episode_returns(env, policy, m, seed)
        return float(totals.mean()), float(totals.std(ddof=1) / np.sqrt(m))
    raise TypeError(f"unknown oracle {oracle!r}")


def _symmetry_applies(env, policy):
    return isinstance(env, SplineDynamicsEnv) and isinstance(policy, UniformRandomPolicy)


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ExperimentConfig:
    policies: tuple
    n_grid: tuple
    t_grid: tuple
    replicates: int
    base_seed: int
    env_preset: str = "paper"
    f_coefficients: tuple = None
    k_rule: object = LoocvK()
    ridge: object = TraceScaledRidge()
    oracle: object = AutoOracle()
    integration: object = QuadratureRule()
    output: str = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "t_grid", tuple(int(t) for t in self.t_grid))
        if not self.policies:
            raise ValueError("policies must be nonempty")
        for grid, name in ((self.n_grid, "n_grid"), (self.t_grid, "T_grid")):
            if not grid:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            if grid[0] < 1:
                raise ValueError(f"{name} entries must be positive")
        check_positive_int(self.replicates, "replicates")
        check_seed(self.base_seed, "base_seed")
        check_positive_int(self.workers, "workers")
        if self.env_preset != "paper":
            raise ValueError(f"unknown environment preset {self.env_preset!r}")
        if isinstance(self.oracle, (MonteCarloOracle, AutoOracle)):
            if self.oracle.episodes < 10**4:
                raise ValueError("Monte-Carlo oracle needs at least 10^4 episodes")

    @classmethod
    def from_dict(cls, doc):
        """Parse the JSON-document form; unknown keys are rejected."""
        doc = dict(doc)
        kwargs = {}
        env = doc.pop("env", {"preset": "paper"})
        env = dict(env)
        kwargs["env_preset"] = env.pop("preset", "paper")
        coeffs = env.pop("f_coefficients", None)
        kwargs["f_coefficients"] = None if coeffs is None else tuple(coeffs)
        if env:
            raise ValueError(f"unknown env keys: {sorted(env)}")
        for key in ("policies", "n_grid", "replicates", "base_seed"):
            if key not in doc:
                raise ValueError(f"missing config key {key!r}")
            kwargs[key] = doc.pop(key)
        if "T_grid" not in doc:
            raise ValueError("missing config key 'T_grid'")
        kwargs["t_grid"] = doc.pop("T_grid")
        if "k_rule" in doc:
            kwargs["k_rule"] = _parse_k_rule(doc.pop("k_rule"))
        if "ridge" in doc:
            kwargs["ridge"] = _parse_ridge(doc.pop("ridge"))
        if "oracle" in doc:
            kwargs["oracle"] = _parse_oracle(doc.pop("oracle"))
        if "integration" in doc:
            kwargs["integration"] = _parse_integration(doc.pop("integration"))
        if "output" in doc:
            kwargs["output"] = doc.pop("output")
        if "workers" in doc:
            kwargs["workers"] = doc.pop("workers")
        if doc:
            raise ValueError(f"unknown config keys: {sorted(doc)}")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _pop_kind(doc, what, kinds):
    doc = dict(doc)
    kind = doc.pop("kind", None)
    if kind not in kinds:
        raise ValueError(f"{what} kind must be one of {sorted(kinds)}, got {kind!r}")
    return kind, doc


def _reject_extras(doc, what):
    if doc:
        raise ValueError(f"unknown {what} keys: {sorted(doc)}")


def _parse_k_rule(doc):
    kind, doc = _pop_kind(doc, "k_rule", {"fixed", "rule_of_thumb", "loocv"})
    if kind == "fixed":
        rule = FixedK(k=int(doc.pop("k")))
    elif kind == "rule_of_thumb":
        rule = RuleOfThumbK(
            c=float(doc.pop("c", 3.0)), exponent=float(doc.pop("exponent", 0.2))
        )
    else:
        cands = doc.pop("candidates", None)
        rule = LoocvK(candidates=None if cands is None else tuple(int(k) for k in cands))
    _reject_extras(doc, "k_rule")
    return rule


def _parse_ridge(doc):
    kind, doc = _pop_kind(doc, "ridge", {"fixed", "trace_scaled"})
    if kind == "fixed":
        rule = FixedRidge(value=float(doc.pop("value")))
    else:
        rule = TraceScaledRidge(scale=float(doc.pop("scale", 1e-8)))
    _reject_extras(doc, "ridge")
    return rule


def _parse_oracle(doc):
    kind, doc = _pop_kind(doc, "oracle", {"symmetry_zero", "monte_carlo", "auto"})
    if kind == "symmetry_zero":
        oracle = SymmetryZeroOracle()
    else:
        cls = MonteCarloOracle if kind == "monte_carlo" else AutoOracle
        oracle = cls(
            episodes=int(doc.pop("episodes", 10**6)),
            seed=int(doc.pop("seed", 20260801)),
        )
    _reject_extras(doc, "oracle")
    return oracle


def _parse_integration(doc):
    kind, doc = _pop_kind(doc, "integration", {"quadrature", "monte_carlo"})
    if kind == "quadrature":
        rule = QuadratureRule(nodes=int(doc.pop("nodes", 201)))
    else:
        rule = MonteCarloRule(draws=int(doc.pop("draws")), seed=int(doc.pop("seed")))
    _reject_extras(doc, "integration")
    return rule


# ---------------------------------------------------------------------------
# Records


@dataclass(frozen=True)
class ExperimentRecord:
    policy: str
    n: int
    T: int
    k_rule: str
    k_mean: float
    replicate: int
    nu_hat: float
    nu_true: float
    abs_error: float
    seed: int
    wall_time_ms: float
    status: str = "ok"
    reason: str = ""


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FLOAT_FMT.format(float(value))


def _record_row(record):
    return [
        record.policy,
        str(record.n),
        str(record.T),
        record.k_rule,
        _fmt(record.k_mean),
        str(record.replicate),
        _fmt(record.nu_hat),
        _fmt(record.nu_true),
        _fmt(record.abs_error),
        str(record.seed),
        "0",  # measured timing kept in memory only; see module docstring
        record.status,
        record.reason,
    ]


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        for cell in row:
            if any(ch in cell for ch in ",\"\n"):
                raise ValueError(f"cell {cell!r} needs quoting; unexpected in this format")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_records_csv(records, path):
    _atomic_write(path, _csv_text(RESULTS_HEADER, [_record_row(r) for r in records]))


def write_summary_csv(rows, path):
    _atomic_write(path, summary_to_text(rows))


def summary_to_text(rows):
    out = []
    for row in rows:
        out.append(
            [
                row["policy"],
                str(row["n"]),
                str(row["T"]),
                _fmt(row["mean"]),
                _fmt(row["median"]),
                _fmt(row["q10"]),
                _fmt(row["q90"]),
                str(row["failures"]),
            ]
        )
    return _csv_text(SUMMARY_HEADER, out)


# ---------------------------------------------------------------------------
# Execution


def _replicate_task(args):
    (env, target, policy_name, n, T, rep, seed, k_rule, ridge, integration, nu_true) = args
    start = time.perf_counter()
    behavior = UniformRandomPolicy(n_actions=env.n_actions)
    try:
        batch = simulate(env, behavior, n, seed)
        model = FittedQEvaluation(policy=target, k_rule=k_rule, ridge=ridge)
        model.fit(batch, env)
        nu_hat = model.estimate_value(integration)
        k_mean = float(np.mean(model.k_per_step_))
        wall = (time.perf_counter() - start) * 1e3
        return ExperimentRecord(
            policy=policy_name,
            n=n,
            T=T,
            k_rule=k_rule_label(k_rule),
            k_mean=k_mean,
            replicate=rep,
            nu_hat=nu_hat,
            nu_true=nu_true,
            abs_error=abs(nu_hat - nu_true),
            seed=seed,
            wall_time_ms=wall,
        )
    except (SingularDesignError, LoocvUndefinedError) as exc:
        wall = (time.perf_counter() - start) * 1e3
        return ExperimentRecord(
            policy=policy_name,
            n=n,
            T=T,
            k_rule=k_rule_label(k_rule),
            k_mean=None,
            replicate=rep,
            nu_hat=None,
            nu_true=nu_true,
            abs_error=None,
            seed=seed,
            wall_time_ms=wall,
            status="error",
            reason=str(exc).replace(",", ";").replace("\n", " "),
        )


def run(config):
    """Execute the configured sweep; returns records and writes the CSV.

    Oracle values are computed once per (policy, T) and cached.  Replicates
    are independent work items; with ``workers > 1`` they are distributed
    over a process pool and merged back in deterministic grid order.
    """
    envs = {
        T: make_spline_env(config.f_coefficients, horizon=T) for T in config.t_grid
    }
    targets = {
        (name, T): target_policy(name, envs[T])
        for name in config.policies
        for T in config.t_grid
    }
    oracles = {
        (name, T): true_value(envs[T], targets[(name, T)], config.oracle)[0]
        for name in config.policies
        for T in config.t_grid
    }
    tasks = []
    for name in config.policies:
        for n in config.n_grid:
            for T in config.t_grid:
                for rep in range(config.replicates):
                    seed = derive_seed(config.base_seed, "replicate", name, n, T, rep)
                    tasks.append(
                        (
                            envs[T],
                            targets[(name, T)],
                            name,
                            n,
                            T,
                            rep,
                            seed,
                            config.k_rule,
                            config.ridge,
                            config.integration,
                            oracles[(name, T)],
                        )
                    )
    if config.workers > 1:
        chunk = max(1, len(tasks) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_replicate_task, tasks, chunksize=chunk))
    else:
        records = [_replicate_task(t) for t in tasks]
    if config.output:
        write_records_csv(records, config.output)
    return records


def aggregate(records):
    """Per-(policy, n, T) summary of absolute errors; error rows counted."""
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    order = []
    for rec in records:
        key = (rec.policy, rec.n, rec.T)
        if key not in groups:
            groups[key] = {"errors": [], "failures": 0}
            order.append(key)
        if rec.status == "ok":
            groups[key]["errors"].append(rec.abs_error)
        else:
            groups[key]["failures"] += 1
    rows = []
    for key in order:
        policy, n, T = key
        errs = np.asarray(groups[key]["errors"])
        row = {"policy": policy, "n": n, "T": T, "failures": groups[key]["failures"]}
        if errs.size:
            row.update(
                mean=float(errs.mean()),
                median=float(np.median(errs)),
                q10=float(np.quantile(errs, 0.10)),
                q90=float(np.quantile(errs, 0.90)),
            )
        else:
            row.update(mean=None, median=None, q10=None, q90=None)
        rows.append(row)
    return rows
