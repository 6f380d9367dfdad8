"""Backward fitted Q-evaluation with per-step linear-sieve features."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .basis import BSplineFeatures, FeatureMap, IndicatorFeatures
from .envs import TabularEnv
from .quadrature import QuadratureRule, initial_nodes
from .regression import (
    LoocvUndefinedError,
    SingularDesignError,
    TraceScaledRidge,
    blocked_solve,
)
from .selection import LoocvK, loocv_candidates, resolve_k, select_k_loocv

__all__ = ["FittedQEvaluation"]


class FittedQEvaluation(BaseEstimator):
    """Estimate a target policy's value from behavior-policy trajectories.

    State-action value functions are fit backward from the final step by
    regularized least squares on action-blocked features: one-hot state
    indicators for tabular environments, clamped B-splines with per-step
    percentile knots otherwise.  The policy value is then the initial-state
    integral of the step-1 fit.

    Parameters
    ----------
    policy : object
        Target policy; must expose ``action_probs(t, states)``.
    k_rule : FixedK | RuleOfThumbK | LoocvK
        Basis-size rule for spline features (ignored for tabular data, where
        the indicator basis is saturated).
    ridge : FixedRidge | TraceScaledRidge
        Ridge rule resolved per step against the average Gram matrix.
    degree : int
        Spline degree.
    quad_nodes : int
        Default Gauss-Legendre budget for the initial-state integral.

    Attributes
    ----------
    features_ : list of FeatureMap, one per step.
    coef_ : list of ndarray, per-step coefficients of length K * n_actions.
    ridge_values_ : list of float, resolved per-step ridge levels.
    k_per_step_ : list of int, state-basis sizes actually used.
    value_ : float, set by :meth:`estimate_value`.
    """

    def __init__(self, policy=None, k_rule=None, ridge=None, degree=3, quad_nodes=201):
        self.policy = policy
        self.k_rule = k_rule
        self.ridge = ridge
        self.degree = degree
        self.quad_nodes = quad_nodes

    def _effective_ridge(self):
        return self.ridge if self.ridge is not None else TraceScaledRidge()

    def fit(self, batch, env):
        """Run the backward recursion over ``batch`` drawn from ``env``."""
        if self.policy is None:
            raise ValueError("a target policy is required")
        if env.horizon != batch.horizon:
            raise ValueError(
                f"batch horizon {batch.horizon} != environment horizon {env.horizon}"
            )
        if self.policy.n_actions != env.n_actions:
            raise ValueError("policy and environment action counts differ")
        T = batch.horizon
        n = batch.n_episodes
        n_actions = env.n_actions
        tabular = isinstance(env, TabularEnv)
        ridge_rule = self._effective_ridge()

        features = [None] * T
        coefs = [None] * T
        lams = [None] * T
        ks = [None] * T
        y = None
        for t in reversed(range(T)):
            s_t = batch.states[:, t]
            if t == T - 1:
                y = batch.rewards[:, t].astype(float)
            else:
                s_next = batch.states[:, t + 1]
                probs_next = self.policy.action_probs(t + 1, s_next)
                cont = features[t + 1].policy_features(s_next, probs_next) @ coefs[t + 1]
                y = batch.rewards[:, t] + cont
            try:
                fmap, beta, lam, k = self._fit_step(
                    s_t, batch.actions[:, t], y, n, n_actions, tabular, env, ridge_rule
                )
            except (SingularDesignError, LoocvUndefinedError) as exc:
                raise type(exc)(f"step {t}: {exc}") from exc
            features[t], coefs[t], lams[t], ks[t] = fmap, beta, lam, k

        self.features_ = features
        self.coef_ = coefs
        self.ridge_values_ = lams
        self.k_per_step_ = ks
        self.horizon_ = T
        self.n_actions_ = n_actions
        self.env_ = env
        return self

    def _fit_step(self, states, actions, y, n, n_actions, tabular, env, ridge_rule):
        if tabular:
            basis = IndicatorFeatures(n_states=env.n_states).fit(states)
        else:
            if isinstance(self.k_rule, LoocvK):
                candidates = loocv_candidates(self.k_rule, n, self.degree)
                k = select_k_loocv(
                    states, y, actions, candidates, ridge_rule, n_actions, self.degree
                )
            else:
                k = resolve_k(self.k_rule, n, self.degree)
            basis = BSplineFeatures(n_basis=k, degree=self.degree).fit(states)
        psi = basis.transform(states)
        k_used = psi.shape[1]
        lam = ridge_rule.resolve(
            float(np.einsum("ij,ij->", psi, psi)) / n, k_used * n_actions
        )
        beta = blocked_solve(psi, y, actions, n_actions, lam)
        return FeatureMap(basis, n_actions), beta, lam, k_used

    def _check_step(self, t):
        check_is_fitted(self, "coef_")
        if not 0 <= t < self.horizon_:
            raise IndexError(f"step {t} out of range [0, {self.horizon_})")

    def q_values(self, t, states, actions):
        """Fitted Q at step ``t`` (zero-based) for arrays of (state, action)."""
        self._check_step(t)
        return self.features_[t].features(states, actions) @ self.coef_[t]

    def q_value(self, t, state, action):
        """Scalar convenience wrapper around :meth:`q_values`."""
        return float(self.q_values(t, np.atleast_1d(state), np.atleast_1d(action))[0])

    def estimate_value(self, integration=None):
        """Initial-state integral of the step-1 fit under the target policy.

        Uses exact summation for finite initial laws and composite
        Gauss-Legendre (split at the step-1 knots) for uniform-interval laws;
        the result is stored as ``value_``.
        """
        self._check_step(0)
        if integration is None:
            integration = QuadratureRule(self.quad_nodes)
        points, weights = initial_nodes(self.env_, integration, self.features_[0])
        probs = self.policy.action_probs(0, points)
        v1 = self.features_[0].policy_features(points, probs) @ self.coef_[0]
        self.value_ = float(weights @ v1)
        return self.value_

    def to_json(self, path=None):
        """Serialize the fitted model; returns the JSON string.

        ``lambda`` is a single number when the ridge resolved identically at
        every step and a per-step list otherwise.
        """
        check_is_fitted(self, "coef_")
        lams = self.ridge_values_
        lam_field = lams[0] if len(set(lams)) == 1 else list(lams)
        doc = {
            "T": self.horizon_,
            "lambda": lam_field,
            "steps": [
                {
                    "K": int(self.k_per_step_[t]),
                    "knots": None
                    if self.features_[t].knots is None
                    else [float(k) for k in self.features_[t].knots],
                    "beta": [float(b) for b in self.coef_[t]],
                }
                for t in range(self.horizon_)
            ],
            "value": getattr(self, "value_", None),
        }
        text = json.dumps(doc, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text
