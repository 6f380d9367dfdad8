"""Regularized linear least squares and closed-form leave-one-out CV.

The solver targets the normal equations ``(X'X + n * ridge * I) b = X'y``,
i.e. the ridge parameter scales the identity against the *average* Gram
matrix ``X'X / n``.  Feature dimensions here are small relative to n, so a
Cholesky factorization of the normal equations is both fast and stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "SingularDesignError",
    "LoocvUndefinedError",
    "FixedRidge",
    "TraceScaledRidge",
    "resolve_ridge",
    "solve",
    "hat_diagonal",
    "loocv_terms",
    "loocv_score",
    "blocked_solve",
    "blocked_loocv_terms",
]

# Leverage values this close to 1 mean the point is interpolated exactly and
# its leave-one-out residual is undefined.
_LEVERAGE_TOL = 1e-12


class SingularDesignError(RuntimeError):
    """Normal equations are not positive definite (rank-deficient design)."""


class LoocvUndefinedError(RuntimeError):
    """Every sample is interpolated; leave-one-out residuals are undefined."""


@dataclass(frozen=True)
class FixedRidge:
    """Constant ridge level (0 gives plain least squares)."""

    value: float = 0.0

    def resolve(self, gram_trace, dim):
        if self.value < 0:
            raise ValueError("ridge must be nonnegative")
        return float(self.value)


@dataclass(frozen=True)
class TraceScaledRidge:
    """Ridge proportional to the mean diagonal of the average Gram matrix."""

    scale: float = 1e-8

    def resolve(self, gram_trace, dim):
        return float(self.scale) * float(gram_trace) / float(dim)


def resolve_ridge(rule, X):
    """Resolve a ridge rule (or a plain float) against a design matrix."""
    if isinstance(rule, (int, float)):
        return FixedRidge(float(rule)).resolve(0.0, 1)
    n = X.shape[0]
    gram_trace = float(np.einsum("ij,ij->", X, X)) / n
    return rule.resolve(gram_trace, X.shape[1])


def _normal_factor(X, ridge):
    n, d = X.shape
    C = X.T @ X
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge > 0:
        C[np.diag_indices(d)] += n * ridge
    try:
        return linalg.cho_factor(C, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularDesignError(
            f"normal equations ({d}x{d}, ridge={ridge:g}) are not positive "
            "definite; the design is rank-deficient"
        ) from exc


def solve(X, y, ridge=0.0):
    """Coefficients solving ``(X'X + n * ridge * I) b = X'y``.

    Raises :class:`SingularDesignError` when the regularized normal equations
    cannot be factorized (rank-deficient design with ridge = 0).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per response entry")
    factor = _normal_factor(X, ridge)
    return linalg.cho_solve(factor, X.T @ y, check_finite=False)


def hat_diagonal(X, ridge=0.0, factor=None):
    """Diagonal of the smoother matrix ``X (X'X + n*ridge*I)^{-1} X'``."""
    X = np.asarray(X, dtype=float)
    if factor is None:
        factor = _normal_factor(X, ridge)
    Z = linalg.cho_solve(factor, X.T, check_finite=False)
    return np.einsum("ij,ji->i", X, Z)


def loocv_terms(X, y, ridge=0.0):
    """Squared leave-one-out residuals ``((y - yhat) / (1 - h))^2``.

    Terms whose leverage reaches 1 (interpolated samples) come back as NaN;
    callers decide how to aggregate.  The smoother's penalty matrix is held
    fixed at ``n * ridge * I`` across the leave-one-out refits, which makes
    the closed form exact.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    factor = _normal_factor(X, ridge)
    beta = linalg.cho_solve(factor, X.T @ y, check_finite=False)
    resid = y - X @ beta
    h = hat_diagonal(X, ridge, factor=factor)
    denom = 1.0 - h
    terms = np.full(len(y), np.nan)
    ok = denom > _LEVERAGE_TOL
    terms[ok] = (resid[ok] / denom[ok]) ** 2
    return terms


def loocv_score(X, y, ridge=0.0):
    """Exact leave-one-out mean squared error of the ridge smoother.

    Interpolated samples (leverage 1) are dropped from the mean; if every
    sample is interpolated the score is undefined and an error is raised.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) < 2:
        raise ValueError("leave-one-out needs at least 2 samples")
    terms = loocv_terms(X, y, ridge)
    ok = ~np.isnan(terms)
    if not np.any(ok):
        raise LoocvUndefinedError(
            "LOOCV undefined: every sample has unit leverage (interpolating fit)"
        )
    return float(terms[ok].mean())


# ---------------------------------------------------------------------------
# Action-blocked designs.  A design whose row i places a state basis vector
# in the block of action a_i has block-diagonal normal equations, so solving
# and leave-one-out decompose into one small problem per action.  Both
# functions below are numerically equivalent to assembling the full blocked
# design and calling `solve` / `loocv_terms` on it.


def _action_masks(actions, n_actions, ridge):
    actions = np.asarray(actions)
    for a in range(n_actions):
        mask = actions == a
        if ridge == 0.0 and not np.any(mask):
            raise SingularDesignError(
                f"action {a} has no observations and ridge is 0; the blocked "
                "design is rank-deficient"
            )
        yield a, mask


def blocked_solve(psi, y, actions, n_actions, ridge=0.0):
    """Solve the blocked problem; returns the stacked coefficient vector.

    The penalty is ``n * ridge * I`` with ``n`` the full sample count, exactly
    as `solve` applies to the assembled design.
    """
    psi = np.asarray(psi, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, k = psi.shape
    beta = np.zeros(k * n_actions)
    for a, mask in _action_masks(actions, n_actions, ridge):
        n_a = int(mask.sum())
        if n_a == 0:
            continue
        beta[a * k : (a + 1) * k] = solve(psi[mask], y[mask], ridge * n / n_a)
    return beta


def blocked_loocv_terms(psi, y, actions, n_actions, ridge=0.0):
    """Row-aligned squared leave-one-out residuals of the blocked smoother."""
    psi = np.asarray(psi, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = len(y)
    terms = np.full(n, np.nan)
    for a, mask in _action_masks(actions, n_actions, ridge):
        n_a = int(mask.sum())
        if n_a == 0:
            continue
        terms[mask] = loocv_terms(psi[mask], y[mask], ridge * n / n_a)
    return terms
