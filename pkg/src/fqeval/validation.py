"""Input validation helpers shared across the package."""
from __future__ import annotations

import numbers

import numpy as np

MAX_SEED = 2**64


def check_positive_int(value, name):
    """Return ``value`` as int, requiring an integer >= 1."""
    if not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return value


def check_seed(seed, name="seed"):
    """Return ``seed`` as a plain int in [0, 2**64)."""
    if not isinstance(seed, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"{name} must be a 64-bit unsigned integer, got {seed}")
    return seed


def as_float_1d(values, name):
    """Return ``values`` as a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_probability_rows(probs, name, tol=1e-12):
    """Validate that every row of ``probs`` is a probability vector."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -tol):
        raise ValueError(f"{name} has negative probabilities")
    sums = probs.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValueError(
            f"{name} rows must sum to 1 within {tol:g} (worst deviation {worst:g})"
        )
    return probs


def check_action_indices(actions, n_actions, name="actions"):
    """Validate integer action indices in [0, n_actions)."""
    actions = np.asarray(actions)
    if not np.issubdtype(actions.dtype, np.integer):
        if not np.all(actions == np.floor(actions)):
            raise ValueError(f"{name} must be integer action indices")
        actions = actions.astype(np.int64)
    if actions.size and (actions.min() < 0 or actions.max() >= n_actions):
        raise ValueError(f"{name} must lie in [0, {n_actions})")
    return actions
