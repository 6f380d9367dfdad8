"""State feature bases and the action-blocked feature map.

``BSplineFeatures`` is a scikit-learn style transformer: ``fit`` places knots
at evenly spaced percentiles of the training samples, ``transform`` evaluates
the clamped B-spline basis.  ``IndicatorFeatures`` provides the one-hot basis
for tabular states.  ``FeatureMap`` composes a fitted state basis with a
finite action set: each action owns one block of the feature vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import as_float_1d, check_action_indices

__all__ = [
    "build_knots",
    "BSplineFeatures",
    "IndicatorFeatures",
    "FeatureMap",
]


def build_knots(samples, n_basis, degree=3):
    """Clamped knot vector with interior knots at sample percentiles.

    Interior knots sit at the ``j / (m + 1)`` quantiles (linear interpolation
    between order statistics), ``m = n_basis - degree - 1``; the boundary knot
    is repeated ``degree + 1`` times just outside the sample range.  Repeated
    interior knots are nudged apart by ``1e-12`` steps so the vector stays
    strictly valid under heavy ties.
    """
    samples = as_float_1d(samples, "samples")
    if n_basis < degree + 1:
        raise ValueError(
            f"n_basis must be at least degree + 1 = {degree + 1}, got {n_basis}"
        )
    m = n_basis - degree - 1
    lo, hi = float(samples.min()), float(samples.max())
    eps = 1e-9 * (hi - lo + 1.0)
    lo, hi = lo - eps, hi + eps
    if m > 0:
        levels = np.arange(1, m + 1) / (m + 1)
        interior = np.quantile(samples, levels)
        for j in range(1, m):
            if interior[j] <= interior[j - 1]:
                interior[j] = interior[j - 1] + 1e-12
        interior = np.clip(interior, lo, hi)
    else:
        interior = np.empty(0)
    return np.concatenate(
        [np.full(degree + 1, lo), interior, np.full(degree + 1, hi)]
    )


class BSplineFeatures(TransformerMixin, BaseEstimator):
    """Clamped B-spline state basis with percentile knot placement.

    Parameters
    ----------
    n_basis : int
        Number of basis functions; must be at least ``degree + 1``.
    degree : int
        Spline degree (cubic by default).
    """

    def __init__(self, n_basis=8, degree=3):
        self.n_basis = n_basis
        self.degree = degree

    def fit(self, X, y=None):
        samples = as_float_1d(X, "X")
        self.knots_ = build_knots(samples, self.n_basis, self.degree)
        self.n_features_out_ = len(self.knots_) - self.degree - 1
        return self

    def transform(self, X):
        """Evaluate the basis; queries outside the knot span are clamped."""
        check_is_fitted(self, "knots_")
        x = np.asarray(X, dtype=float).reshape(-1)
        lo, hi = self.knots_[self.degree], self.knots_[-self.degree - 1]
        x = np.clip(x, lo, hi)
        design = BSpline.design_matrix(x, self.knots_, self.degree, extrapolate=False)
        return design.toarray()

    @property
    def interior_breakpoints(self):
        check_is_fitted(self, "knots_")
        return np.unique(self.knots_[self.degree + 1 : -self.degree - 1])


class IndicatorFeatures(TransformerMixin, BaseEstimator):
    """One-hot basis over a finite state set (tabular environments)."""

    def __init__(self, n_states=2):
        self.n_states = n_states

    def fit(self, X, y=None):
        self.n_features_out_ = self.n_states
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        idx = np.asarray(X).reshape(-1).astype(np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_states):
            raise ValueError(f"state indices must lie in [0, {self.n_states})")
        out = np.zeros((len(idx), self.n_states))
        out[np.arange(len(idx)), idx] = 1.0
        return out

    @property
    def interior_breakpoints(self):
        return np.empty(0)


@dataclass(frozen=True)
class FeatureMap:
    """Action-blocked feature map over a fitted state basis.

    The feature vector for ``(s, a)`` has the state basis in block ``a``
    (zero-based) and zeros elsewhere, for a total dimension of
    ``n_state_features * n_actions``.
    """

    state_basis: object
    n_actions: int

    @property
    def n_state_features(self):
        return self.state_basis.n_features_out_

    @property
    def n_features(self):
        return self.n_state_features * self.n_actions

    @property
    def knots(self):
        return getattr(self.state_basis, "knots_", None)

    def state_features(self, states):
        """Per-state basis matrix, shape ``(n, K)``."""
        return self.state_basis.transform(states)

    def features(self, states, actions):
        """Blocked features for observed pairs, shape ``(n, K * n_actions)``."""
        psi = self.state_features(states)
        actions = check_action_indices(
            np.atleast_1d(actions), self.n_actions, "actions"
        )
        n, k = psi.shape
        if len(actions) != n:
            raise ValueError("states and actions must have equal length")
        out = np.zeros((n, k * self.n_actions))
        cols = actions[:, None] * k + np.arange(k)[None, :]
        out[np.arange(n)[:, None], cols] = psi
        return out

    def feature_vector(self, state, action):
        """Single blocked feature vector for scalar ``(state, action)``."""
        return self.features(np.atleast_1d(state), np.atleast_1d(action))[0]

    def policy_features(self, states, action_probs):
        """Policy-averaged features ``sum_a pi(a|s) phi(s, a)``, blockwise."""
        psi = self.state_features(states)
        probs = np.asarray(action_probs, dtype=float)
        if probs.shape != (psi.shape[0], self.n_actions):
            raise ValueError("action_probs must have shape (n, n_actions)")
        n, k = psi.shape
        out = np.empty((n, k * self.n_actions))
        for a in range(self.n_actions):
            out[:, a * k : (a + 1) * k] = psi * probs[:, a : a + 1]
        return out
