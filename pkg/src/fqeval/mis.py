"""Marginal-importance-sampling weights, the weighted value estimator, and
the distribution-shift diagnostic.

The linear fitted-Q value estimate can be rewritten as a weighted average of
observed rewards: propagating the initial feature expectation through the
per-step estimated conditional-expectation operators yields one weight per
(episode, step).  `compute_weights` realizes that operator product as a
vector recursion; with the same features, ridge levels, and initial-state
integration rule, `mis_value` reproduces the fitted-Q estimate to solver
precision.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .quadrature import QuadratureRule, initial_nodes
from .regression import SingularDesignError

__all__ = ["MisWeights", "compute_weights", "mis_value", "kappa_hat"]

_FLOAT_FMT = "{:.17g}"


@dataclass(frozen=True)
class MisWeights:
    """Per-(episode, step) weights plus the propagated row functionals."""

    weights: np.ndarray  # (n, T)
    propagated: tuple  # length T, step-t vector of dimension K_t * |A|

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "t", "weight"])
            n, T = self.weights.shape
            for i in range(n):
                for t in range(T):
                    writer.writerow([i, t, _FLOAT_FMT.format(self.weights[i, t])])


def _regularized_gram_solve(phi, lam, rhs, step):
    n, d = phi.shape
    gram = phi.T @ phi / n
    gram[np.diag_indices(d)] += lam
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularDesignError(
            f"step {step}: regularized Gram matrix is singular (ridge={lam:g})"
        ) from exc
    return linalg.cho_solve(factor, rhs, check_finite=False)


def _resolve_lams(ridge, feature_maps, batch):
    """Per-step ridge levels; accepts a rule or a precomputed sequence."""
    T = batch.horizon
    if isinstance(ridge, (list, tuple, np.ndarray)):
        lams = [float(v) for v in ridge]
        if len(lams) != T:
            raise ValueError("per-step ridge list length must equal the horizon")
        return lams
    lams = []
    for t in range(T):
        psi = feature_maps[t].state_features(batch.states[:, t])
        lams.append(
            ridge.resolve(
                float(np.einsum("ij,ij->", psi, psi)) / batch.n_episodes,
                psi.shape[1] * feature_maps[t].n_actions,
            )
        )
    return lams


def compute_weights(batch, policy, feature_maps, env, ridge, integration=None):
    """Extract the implicit importance weights of the linear fitted-Q value.

    ``feature_maps`` and ``ridge`` must match the fit being analyzed (pass
    the fitted model's ``features_`` and ``ridge_values_``); ``integration``
    must match the rule used for its initial-state integral.
    """
    T = batch.horizon
    n = batch.n_episodes
    if len(feature_maps) != T:
        raise ValueError("need one feature map per step")
    if integration is None:
        integration = QuadratureRule()
    lams = _resolve_lams(ridge, feature_maps, batch)

    points, wts = initial_nodes(env, integration, feature_maps[0])
    probs0 = policy.action_probs(0, points)
    u = feature_maps[0].policy_features(points, probs0).T @ wts

    weights = np.empty((n, T))
    propagated = []
    for t in range(T):
        phi = feature_maps[t].features(batch.states[:, t], batch.actions[:, t])
        if phi.shape[1] != len(u):
            raise ValueError(f"step {t}: feature dimension mismatch")
        propagated.append(u)
        v = _regularized_gram_solve(phi, lams[t], u, t)
        weights[:, t] = phi @ v
        if t < T - 1:
            s_next = batch.states[:, t + 1]
            probs_next = policy.action_probs(t + 1, s_next)
            g_next = feature_maps[t + 1].policy_features(s_next, probs_next)
            u = (phi.T @ g_next / n).T @ v
    return MisWeights(weights=weights, propagated=tuple(propagated))


def mis_value(batch, weights):
    """Weighted-reward value estimate ``sum_t mean_i(w_it * R_it)``."""
    w = weights.weights
    if w.shape != batch.rewards.shape:
        raise ValueError("weights and rewards must have matching shapes")
    return float((w * batch.rewards).mean(axis=0).sum())


def kappa_hat(pi_batch, b_batch, feature_maps, ridge):
    """Distribution-shift diagnostic between target and behavior occupancy.

    For each step, the squared target-mean-to-behavior-L2 ratio is maximized
    over the blocked linear function class in closed form:
    ``m' (Gram + ridge I)^{-1} m`` with ``m`` the target-batch feature mean
    and the Gram matrix from the behavior batch.  Returns the average over
    steps.
    """
    if pi_batch.horizon != b_batch.horizon:
        raise ValueError("batches must share a horizon")
    if pi_batch.n_episodes == 0 or b_batch.n_episodes == 0:
        raise ValueError("batches must be nonempty")
    T = pi_batch.horizon
    if len(feature_maps) != T:
        raise ValueError("need one feature map per step")
    lams = _resolve_lams(ridge, feature_maps, b_batch)
    total = 0.0
    for t in range(T):
        m = feature_maps[t].features(pi_batch.states[:, t], pi_batch.actions[:, t]).mean(axis=0)
        phi_b = feature_maps[t].features(b_batch.states[:, t], b_batch.actions[:, t])
        total += float(m @ _regularized_gram_solve(phi_b, lams[t], m, t))
    return total / T
