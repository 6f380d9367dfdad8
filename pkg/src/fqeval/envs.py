"""Finite-horizon episodic environments, policies, and trajectory simulation.

Two environment families are provided: a one-dimensional continuous
environment whose deterministic transition map is a clamped cubic B-spline
curve (actions pick the sign of the drift), and finite tabular environments
with arbitrary per-step transition/reward tensors.  Both expose the same
step/initial-draw interface, so simulation, value estimation, and the
experiment harness work against either.

Conventions: decision steps are zero-based (``t = 0 .. T-1``); a trajectory
stores ``T + 1`` states, the final one unused by the estimators.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import expit

from .validation import (
    as_float_1d,
    check_action_indices,
    check_positive_int,
    check_probability_rows,
    check_seed,
)

__all__ = [
    "SplineCurve",
    "SplineDynamicsEnv",
    "TabularEnv",
    "UniformInterval",
    "FinitePmf",
    "TrajectoryBatch",
    "UniformRandomPolicy",
    "DriftLogisticPolicy",
    "DriftSignPolicy",
    "TablePolicy",
    "DEFAULT_DRIFT_COEFFICIENTS",
    "make_spline_env",
    "make_tabular_env",
    "target_policy",
    "simulate",
    "episode_returns",
    "derive_seed",
]

# Default drift curve: 8 clamped cubic B-spline coefficients on [-2, 2].
# All coefficients lie in [-2, 2], so the curve stays in [-2, 2] by the
# convex-hull property; the curve is smooth and changes sign three times.
DEFAULT_DRIFT_COEFFICIENTS = (-1.7, 0.4, 1.9, 0.8, -1.5, -0.3, 1.8, -1.1)

_FLOAT_FMT = "{:.17g}"


def _format_float(x):
    return _FLOAT_FMT.format(float(x))


@dataclass(frozen=True)
class SplineCurve:
    """Clamped B-spline curve; evaluation clamps queries to the knot span."""

    knots: tuple
    coefficients: tuple
    degree: int = 3

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )
        if len(self.knots) != len(self.coefficients) + self.degree + 1:
            raise ValueError("knot count must equal #coefficients + degree + 1")

    @cached_property
    def _spline(self):
        return BSpline(
            np.asarray(self.knots), np.asarray(self.coefficients), self.degree
        )

    @property
    def support(self):
        return self.knots[self.degree], self.knots[-self.degree - 1]

    def __call__(self, x):
        lo, hi = self.support
        return self._spline(np.clip(np.asarray(x, dtype=float), lo, hi))


def _uniform_clamped_knots(n_coefficients, lo, hi, degree=3):
    n_interior = n_coefficients - degree - 1
    if n_interior < 0:
        raise ValueError("need at least degree + 1 coefficients")
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    return tuple([lo] * (degree + 1) + list(interior) + [hi] * (degree + 1))


@dataclass(frozen=True)
class UniformInterval:
    """Uniform initial law on a closed interval."""

    lo: float
    hi: float

    def draw(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class FinitePmf:
    """Initial probability mass function over finite states."""

    probs: tuple

    def draw(self, n, rng):
        cdf = np.cumsum(np.asarray(self.probs))
        u = rng.random(n)
        return np.minimum((u[:, None] >= cdf[None, :]).sum(axis=1), len(cdf) - 1)


@dataclass(frozen=True)
class SplineDynamicsEnv:
    """1-D continuous environment: ``S' = (2A - 1) * drift(S)``, reward ``2 S'``.

    The initial state is uniform on ``domain`` and the drift curve is bounded
    by the domain radius, so states never leave the domain.
    """

    horizon: int
    drift: SplineCurve
    domain: tuple = (-2.0, 2.0)
    reward_scale: float = 2.0

    n_actions = 2

    @property
    def initial_distribution(self):
        return UniformInterval(*self.domain)

    def draw_initial(self, n, rng):
        return self.initial_distribution.draw(n, rng)

    def step(self, t, states, actions, rng):
        nxt = (2.0 * actions - 1.0) * self.drift(states)
        return nxt, self.reward_scale * nxt

    @property
    def state_dtype(self):
        return np.float64


@dataclass(frozen=True)
class TabularEnv:
    """Finite-state episodic MDP with per-step transition and reward tensors."""

    horizon: int
    transitions: np.ndarray  # (T, S, A, S)
    rewards: np.ndarray  # (T, S, A)
    initial_probs: np.ndarray  # (S,)

    @property
    def n_states(self):
        return self.transitions.shape[1]

    @property
    def n_actions(self):
        return self.transitions.shape[2]

    @property
    def initial_distribution(self):
        return FinitePmf(tuple(float(p) for p in self.initial_probs))

    def draw_initial(self, n, rng):
        return self.initial_distribution.draw(n, rng)

    def step(self, t, states, actions, rng):
        rows = self.transitions[t, states, actions]  # (n, S)
        cdf = np.cumsum(rows, axis=1)
        u = rng.random(len(states))
        nxt = np.minimum((u[:, None] >= cdf).sum(axis=1), self.n_states - 1)
        return nxt, self.rewards[t, states, actions]

    @property
    def state_dtype(self):
        return np.int64


def make_spline_env(f_coefficients=None, horizon=20, domain=(-2.0, 2.0), degree=3):
    """Build the 1-D spline-drift environment.

    The drift curve is a clamped B-spline on ``domain`` with uniformly spaced
    interior knots; its sup-norm is checked on a dense grid (10001 points)
    against the domain radius so the dynamics cannot leave the domain.
    """
    horizon = check_positive_int(horizon, "horizon")
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi or lo != -hi:
        raise ValueError("domain must be a symmetric interval (-b, b)")
    if f_coefficients is None:
        f_coefficients = DEFAULT_DRIFT_COEFFICIENTS
    coeffs = as_float_1d(f_coefficients, "f_coefficients")
    if len(coeffs) < degree + 1:
        raise ValueError(f"need at least {degree + 1} drift coefficients")
    knots = _uniform_clamped_knots(len(coeffs), lo, hi, degree)
    curve = SplineCurve(knots, tuple(coeffs), degree)
    grid = np.linspace(lo, hi, 10001)
    sup = float(np.max(np.abs(curve(grid))))
    if sup > hi:
        raise ValueError(
            f"sup |f| = {sup:g} exceeds the domain bound {hi:g}; "
            "states would leave the domain"
        )
    return SplineDynamicsEnv(horizon=horizon, drift=curve, domain=(lo, hi))


def make_tabular_env(transitions, rewards, initial_probs, horizon):
    """Build a tabular environment from transition/reward tensors.

    ``transitions`` has shape (S, A, S) or (T, S, A, S); ``rewards`` has shape
    (S, A) or (T, S, A).  Step-independent tensors are broadcast over the
    horizon.  Every transition row must be a probability vector.
    """
    horizon = check_positive_int(horizon, "horizon")
    trans = np.asarray(transitions, dtype=float)
    if trans.ndim == 3:
        trans = np.broadcast_to(trans, (horizon,) + trans.shape).copy()
    if trans.ndim != 4 or trans.shape[0] != horizon or trans.shape[1] != trans.shape[3]:
        raise ValueError("transitions must have shape (S, A, S) or (T, S, A, S)")
    check_probability_rows(trans, "transition rows", tol=1e-9)
    rew = np.asarray(rewards, dtype=float)
    if rew.ndim == 2:
        rew = np.broadcast_to(rew, (horizon,) + rew.shape).copy()
    if rew.shape != trans.shape[:3]:
        raise ValueError("rewards must have shape (S, A) or (T, S, A)")
    if not np.all(np.isfinite(rew)):
        raise ValueError("rewards must be finite")
    p0 = as_float_1d(initial_probs, "initial_probs")
    if len(p0) != trans.shape[1]:
        raise ValueError("initial_probs length must equal the state count")
    check_probability_rows(p0[None, :], "initial_probs", tol=1e-9)
    trans.setflags(write=False)
    rew.setflags(write=False)
    p0.setflags(write=False)
    return TabularEnv(horizon=horizon, transitions=trans, rewards=rew, initial_probs=p0)


# ---------------------------------------------------------------------------
# Policies


@dataclass(frozen=True)
class UniformRandomPolicy:
    """Actions uniform over the action set at every step."""

    n_actions: int = 2
    name: str = "behavior"

    def action_probs(self, t, states):
        return np.full((len(np.atleast_1d(states)), self.n_actions), 1.0 / self.n_actions)


@dataclass(frozen=True)
class DriftLogisticPolicy:
    """Binary policy with ``P(A=1 | s)`` the logistic transform of a curve."""

    curve: SplineCurve
    name: str = "b"

    n_actions = 2

    def action_probs(self, t, states):
        p1 = expit(self.curve(np.atleast_1d(states)))
        return np.column_stack([1.0 - p1, p1])


@dataclass(frozen=True)
class DriftSignPolicy:
    """Binary policy taking action 1 exactly where a curve is positive."""

    curve: SplineCurve
    name: str = "c"

    n_actions = 2

    def action_probs(self, t, states):
        p1 = (self.curve(np.atleast_1d(states)) > 0).astype(float)
        return np.column_stack([1.0 - p1, p1])


@dataclass(frozen=True)
class TablePolicy:
    """Tabular policy: per-step (or shared) state-by-action probability table."""

    table: np.ndarray  # (S, A) or (T, S, A)
    name: str = "tabular"

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        check_probability_rows(table, "policy table")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def n_actions(self):
        return self.table.shape[-1]

    def action_probs(self, t, states):
        states = np.atleast_1d(states)
        if self.table.ndim == 3:
            return self.table[t][states]
        return self.table[states]


_POLICY_ALIASES = {"behavior": "behavior", "a": "a", "b": "b", "c": "c"}


def target_policy(name, env):
    """Return a named policy preset for ``env``.

    ``behavior`` and ``a`` are uniform-random; ``b`` is the logistic transform
    of the drift curve; ``c`` takes the drift's sign.  ``b`` and ``c`` require
    a spline-drift environment.
    """
    if name not in _POLICY_ALIASES:
        raise ValueError(f"unknown policy preset {name!r} (expected one of a, b, c, behavior)")
    if name in ("behavior", "a"):
        return UniformRandomPolicy(n_actions=env.n_actions, name=name)
    if not isinstance(env, SplineDynamicsEnv):
        raise ValueError(f"policy preset {name!r} requires the spline-drift environment")
    if name == "b":
        return DriftLogisticPolicy(curve=env.drift, name=name)
    return DriftSignPolicy(curve=env.drift, name=name)


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class TrajectoryBatch:
    """``n`` i.i.d. episodes: states (n, T+1), actions (n, T), rewards (n, T)."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        n, cols = self.states.shape
        if self.actions.shape != (n, cols - 1) or self.rewards.shape != (n, cols - 1):
            raise ValueError("states must have one more column than actions/rewards")

    @property
    def n_episodes(self):
        return self.states.shape[0]

    @property
    def horizon(self):
        return self.actions.shape[1]

    def to_csv(self, path):
        """Write rows ``episode,t,state,action,reward`` (t = 0..T, 0-based).

        The final row of each episode carries the terminal state with empty
        action/reward fields.  States and rewards use 17 significant digits,
        so the file round-trips float64 exactly.
        """
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "t", "state", "action", "reward"])
            for i in range(self.n_episodes):
                for t in range(self.horizon):
                    writer.writerow(
                        [
                            i,
                            t,
                            _format_float(self.states[i, t]),
                            int(self.actions[i, t]),
                            _format_float(self.rewards[i, t]),
                        ]
                    )
                writer.writerow(
                    [i, self.horizon, _format_float(self.states[i, self.horizon]), "", ""]
                )

    @classmethod
    def from_csv(cls, path):
        rows = []
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["episode", "t", "state", "action", "reward"]
            if reader.fieldnames != expected:
                raise ValueError(f"expected CSV header {expected}, got {reader.fieldnames}")
            for row in reader:
                rows.append(row)
        if not rows:
            raise ValueError("empty trajectory CSV")
        n = max(int(r["episode"]) for r in rows) + 1
        T = max(int(r["t"]) for r in rows)
        states = np.full((n, T + 1), np.nan)
        actions = np.zeros((n, T), dtype=np.int64)
        rewards = np.zeros((n, T))
        for r in rows:
            i, t = int(r["episode"]), int(r["t"])
            states[i, t] = float(r["state"])
            if t < T:
                actions[i, t] = int(r["action"])
                rewards[i, t] = float(r["reward"])
        if np.any(np.isnan(states)):
            raise ValueError("trajectory CSV has missing (episode, t) rows")
        return cls(states=states, actions=actions, rewards=rewards)


def _sample_actions(probs, rng):
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))
    return np.minimum((u[:, None] >= cdf).sum(axis=1), probs.shape[1] - 1)


def simulate(env, policy, n, seed):
    """Simulate ``n`` i.i.d. episodes; a pure function of (env, policy, n, seed)."""
    n = check_positive_int(n, "n")
    seed = check_seed(seed)
    if getattr(policy, "n_actions") != env.n_actions:
        raise ValueError("policy and environment action counts differ")
    rng = np.random.default_rng(seed)
    T = env.horizon
    states = np.empty((n, T + 1), dtype=env.state_dtype)
    actions = np.empty((n, T), dtype=np.int64)
    rewards = np.empty((n, T))
    s = env.draw_initial(n, rng)
    states[:, 0] = s
    for t in range(T):
        probs = check_probability_rows(
            policy.action_probs(t, s), f"policy probabilities at step {t}"
        )
        a = check_action_indices(_sample_actions(probs, rng), env.n_actions)
        s, r = env.step(t, s, a, rng)
        states[:, t + 1] = s
        actions[:, t] = a
        rewards[:, t] = r
    return TrajectoryBatch(states=states, actions=actions, rewards=rewards)


def episode_returns(env, policy, n, seed, chunk_size=65536):
    """Per-episode total rewards for ``n`` fresh episodes, simulated in chunks.

    Streams fixed-size chunks so large Monte-Carlo oracles stay within memory;
    the result is deterministic in (env, policy, n, seed).
    """
    n = check_positive_int(n, "n")
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    done = 0
    while done < n:
        m = min(chunk_size, n - done)
        s = env.draw_initial(m, rng)
        total = np.zeros(m)
        for t in range(env.horizon):
            probs = policy.action_probs(t, s)
            a = _sample_actions(probs, rng)
            s, r = env.step(t, s, a, rng)
            total += r
        out[done : done + m] = total
        done += m
    return out


# ---------------------------------------------------------------------------
# Seed derivation


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def derive_seed(base_seed, *parts):
    """Derive an independent child seed from a base seed and labels.

    Each part (int or str) is folded into the state through a splitmix64
    avalanche round, so distinct (base, parts) tuples map to well-separated
    child seeds and the derivation is reproducible across platforms.
    """
    state = _splitmix64(check_seed(base_seed, "base_seed"))
    for part in parts:
        if isinstance(part, str):
            chunks = part.encode("utf-8")
            for i in range(0, len(chunks), 8):
                state = _splitmix64(
                    state ^ int.from_bytes(chunks[i : i + 8], "little")
                )
            state = _splitmix64(state ^ len(chunks))
        else:
            state = _splitmix64(state ^ (int(part) & 0xFFFFFFFFFFFFFFFF))
    return state
