"""Integration rules against the known initial state distribution.

Continuous (uniform-interval) initial laws are integrated by composite
Gauss-Legendre quadrature split at the feature basis' knot points, so
piecewise-polynomial integrands are handled at machine precision; finite
initial laws are summed exactly.  A Monte-Carlo rule is available as an
alternative for continuous laws.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .envs import FinitePmf, UniformInterval
from .validation import check_positive_int, check_seed

__all__ = ["QuadratureRule", "MonteCarloRule", "initial_nodes", "gauss_legendre_composite"]


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule with approximately ``nodes`` points."""

    nodes: int = 201


@dataclass(frozen=True)
class MonteCarloRule:
    """Seedable Monte-Carlo integration over the initial distribution."""

    draws: int
    seed: int


@lru_cache(maxsize=64)
def _leggauss(order):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre_composite(lo, hi, breakpoints, total_nodes):
    """Nodes and weights for ``integral_lo^hi``, split at interior breakpoints.

    Each span gets at least 4 Gauss-Legendre nodes, with the remaining budget
    spread proportionally to span length; the node count is therefore close
    to, but not exactly, ``total_nodes``.
    """
    total_nodes = check_positive_int(total_nodes, "total_nodes")
    cuts = np.asarray(breakpoints, dtype=float)
    cuts = np.unique(cuts[(cuts > lo) & (cuts < hi)])
    edges = np.concatenate([[lo], cuts, [hi]])
    lengths = np.diff(edges)
    xs, ws = [], []
    for left, length in zip(edges[:-1], lengths):
        order = max(4, int(round(total_nodes * length / (hi - lo))))
        base_x, base_w = _leggauss(order)
        xs.append(left + 0.5 * length * (base_x + 1.0))
        ws.append(0.5 * length * base_w)
    return np.concatenate(xs), np.concatenate(ws)


def initial_nodes(env, integration, feature_map=None):
    """Evaluation points and weights for expectations under the initial law.

    Finite initial laws are returned exactly (the integration rule is
    irrelevant).  For a uniform interval, quadrature splits at the feature
    map's knot breakpoints when one is supplied.
    """
    dist = env.initial_distribution
    if isinstance(dist, FinitePmf):
        probs = np.asarray(dist.probs)
        return np.arange(len(probs)), probs
    if not isinstance(dist, UniformInterval):
        raise ValueError(f"unsupported initial distribution {type(dist).__name__}")
    if isinstance(integration, MonteCarloRule):
        draws = check_positive_int(integration.draws, "draws")
        rng = np.random.default_rng(check_seed(integration.seed))
        points = rng.uniform(dist.lo, dist.hi, size=draws)
        return points, np.full(draws, 1.0 / draws)
    if isinstance(integration, QuadratureRule):
        breakpoints = np.empty(0)
        if feature_map is not None:
            knots = feature_map.knots
            if knots is not None:
                degree = feature_map.state_basis.degree
                breakpoints = np.asarray(knots[degree:-degree])
        x, w = gauss_legendre_composite(dist.lo, dist.hi, breakpoints, integration.nodes)
        return x, w / (dist.hi - dist.lo)
    raise ValueError(f"unsupported integration rule {integration!r}")
