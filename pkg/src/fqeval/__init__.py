"""Finite-horizon off-policy evaluation with fitted Q-evaluation on
B-spline sieves, its marginal-importance-sampling reformulation, and a
replicated experiment harness."""

from .basis import BSplineFeatures, FeatureMap, IndicatorFeatures, build_knots
from .envs import (
    DEFAULT_DRIFT_COEFFICIENTS,
    DriftLogisticPolicy,
    DriftSignPolicy,
    SplineCurve,
    SplineDynamicsEnv,
    TablePolicy,
    TabularEnv,
    TrajectoryBatch,
    UniformRandomPolicy,
    derive_seed,
    episode_returns,
    make_spline_env,
    make_tabular_env,
    simulate,
    target_policy,
)
from .experiments import (
    AutoOracle,
    ExperimentConfig,
    ExperimentRecord,
    MonteCarloOracle,
    SymmetryZeroOracle,
    aggregate,
    run,
    true_value,
    write_records_csv,
    write_summary_csv,
)
from .fqe import FittedQEvaluation
from .mis import MisWeights, compute_weights, kappa_hat, mis_value
from .quadrature import MonteCarloRule, QuadratureRule
from .regression import (
    FixedRidge,
    LoocvUndefinedError,
    SingularDesignError,
    TraceScaledRidge,
    loocv_score,
    solve,
)
from .selection import (
    DEFAULT_LOOCV_CANDIDATES,
    FixedK,
    LoocvK,
    RuleOfThumbK,
    loocv_candidates,
    resolve_k,
    select_k_loocv,
)

__version__ = "0.1.0"
