"""Basis-size rules: fixed K, the ``c * n**exponent`` rule of thumb, and
per-step leave-one-out cross-validation over a candidate list."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BSplineFeatures
from .regression import LoocvUndefinedError, SingularDesignError, blocked_loocv_terms
from .validation import check_positive_int

__all__ = [
    "FixedK",
    "RuleOfThumbK",
    "LoocvK",
    "DEFAULT_LOOCV_CANDIDATES",
    "resolve_k",
    "loocv_candidates",
    "select_k_loocv",
    "parse_k_rule",
    "k_rule_label",
]

DEFAULT_LOOCV_CANDIDATES = (4, 6, 8, 11, 14, 18, 23, 30)


@dataclass(frozen=True)
class FixedK:
    k: int


@dataclass(frozen=True)
class RuleOfThumbK:
    """K rounded from ``c * n**exponent`` (nearest integer, half away up)."""

    c: float = 3.0
    exponent: float = 0.2


@dataclass(frozen=True)
class LoocvK:
    """Per-step LOOCV over ``candidates`` (None picks the default grid)."""

    candidates: tuple = None


def resolve_k(rule, n, degree=3):
    """Basis count for a fixed or rule-of-thumb rule, clamped at degree + 1."""
    n = check_positive_int(n, "n")
    if isinstance(rule, FixedK):
        return check_positive_int(rule.k, "k")
    if isinstance(rule, RuleOfThumbK):
        k = math.floor(rule.c * n**rule.exponent + 0.5)
        return max(degree + 1, k)
    raise TypeError(f"resolve_k expects a fixed or rule-of-thumb rule, got {rule!r}")


def loocv_candidates(rule, n, degree=3):
    """Candidate K list for a sample size: the grid capped at ``n // 20``.

    The cap keeps the blocked design comfortably overdetermined per action;
    without it, near-saturated fits at small n occasionally destabilize the
    whole backward recursion.
    """
    grid = rule.candidates if rule.candidates is not None else DEFAULT_LOOCV_CANDIDATES
    if len(grid) == 0:
        raise ValueError("candidate list must be nonempty")
    if any(k < degree + 1 for k in grid):
        raise ValueError(f"every candidate K must be at least degree + 1 = {degree + 1}")
    cap = n // 20
    kept = sorted({int(k) for k in grid if k <= cap})
    if not kept:
        kept = [min(int(k) for k in grid)]
    return kept


def select_k_loocv(step_states, y, step_actions, candidates, ridge_rule, n_actions, degree=3):
    """Choose K by exact LOOCV of the blocked regression at one step.

    Scores each candidate against the current backward-pass targets ``y``;
    ties and failures resolve toward smaller K.  Raises when no candidate
    yields a defined score.
    """
    if len(candidates) == 0:
        raise ValueError("candidate list must be nonempty")
    states = np.asarray(step_states, dtype=float)
    y = np.asarray(y, dtype=float)
    best_k, best_score = None, np.inf
    for k in sorted(candidates):
        basis = BSplineFeatures(n_basis=int(k), degree=degree).fit(states)
        psi = basis.transform(states)
        lam = ridge_rule.resolve(
            float(np.einsum("ij,ij->", psi, psi)) / len(y), psi.shape[1] * n_actions
        )
        try:
            terms = blocked_loocv_terms(psi, y, step_actions, n_actions, lam)
        except SingularDesignError:
            continue
        ok = ~np.isnan(terms)
        if not np.any(ok):
            continue
        score = float(terms[ok].mean())
        if score < best_score:
            best_k, best_score = int(k), score
    if best_k is None:
        raise LoocvUndefinedError("LOOCV failed for every candidate K")
    return best_k


def parse_k_rule(text):
    """Parse a CLI-style K rule: ``'12'``, ``'rot:3'``, ``'rot:3:0.2'``, ``'loocv'``."""
    text = str(text).strip()
    if text == "loocv":
        return LoocvK()
    if text.startswith("rot:"):
        parts = text.split(":")[1:]
        if len(parts) == 1:
            return RuleOfThumbK(c=float(parts[0]))
        if len(parts) == 2:
            return RuleOfThumbK(c=float(parts[0]), exponent=float(parts[1]))
        raise ValueError(f"bad rule-of-thumb spec {text!r}")
    try:
        return FixedK(k=int(text))
    except ValueError:
        raise ValueError(f"cannot parse K rule {text!r}") from None


def k_rule_label(rule):
    if isinstance(rule, FixedK):
        return f"fixed:{rule.k}"
    if isinstance(rule, RuleOfThumbK):
        return f"rot:{rule.c:g}:{rule.exponent:g}"
    if isinstance(rule, LoocvK):
        return "loocv"
    raise TypeError(f"unknown K rule {rule!r}")
