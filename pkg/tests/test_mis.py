import numpy as np
import pytest

import fqeval as fq
from fqeval.basis import BSplineFeatures, FeatureMap, IndicatorFeatures
from fqeval.quadrature import QuadratureRule
from oracles import kappa_bruteforce
from test_fqe import random_mdp, random_table_policy, single_cell_env


def fit_and_weights(env, target, batch, k_rule=None, ridge=None, integration=None):
    model = fq.FittedQEvaluation(policy=target, k_rule=k_rule, ridge=ridge)
    model.fit(batch, env)
    value = model.estimate_value(integration)
    weights = fq.compute_weights(
        batch, target, model.features_, env, model.ridge_values_, integration
    )
    return model, value, weights


class TestWeights:
    def test_first_step_ratio_when_target_is_behavior(self):
        env = random_mdp(3, horizon=3)
        behavior = fq.UniformRandomPolicy(2)
        batch = fq.simulate(env, behavior, 4000, 5)
        _, _, weights = fit_and_weights(env, behavior, batch, ridge=fq.FixedRidge(0.0))
        # hand computation: rho_1(s, a) / empirical frequency at t = 0
        idx = batch.states[:, 0] * 2 + batch.actions[:, 0]
        counts = np.bincount(idx.astype(int), minlength=6) / batch.n_episodes
        rho = np.repeat(env.initial_probs, 2) * 0.5
        expected = (rho / counts)[idx.astype(int)]
        assert np.allclose(weights.weights[:, 0], expected, atol=1e-10)

    def test_single_cell_weights_are_one(self):
        env = single_cell_env(horizon=3)
        policy = fq.UniformRandomPolicy(1)
        batch = fq.simulate(env, policy, 50, 1)
        _, _, weights = fit_and_weights(env, policy, batch, ridge=fq.FixedRidge(0.0))
        assert np.allclose(weights.weights, 1.0, atol=1e-10)

    def test_mean_first_step_weight_is_one(self):
        env = random_mdp(9, horizon=4)
        behavior = fq.UniformRandomPolicy(2)
        batch = fq.simulate(env, behavior, 10**4, 7)
        _, _, weights = fit_and_weights(env, behavior, batch, ridge=fq.FixedRidge(0.0))
        assert weights.weights[:, 0].mean() == pytest.approx(1.0, abs=1e-10)

    def test_dimension_mismatch_rejected(self):
        env = random_mdp(1, horizon=3)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 100, 2)
        fmaps = [FeatureMap(IndicatorFeatures(3).fit(None), 2)] * 2
        with pytest.raises(ValueError):
            fq.compute_weights(batch, fq.UniformRandomPolicy(2), fmaps, env, [0.0, 0.0])

    def test_csv_export(self, tmp_path):
        env = single_cell_env(horizon=2)
        policy = fq.UniformRandomPolicy(1)
        batch = fq.simulate(env, policy, 3, 1)
        _, _, weights = fit_and_weights(env, policy, batch, ridge=fq.FixedRidge(0.0))
        path = tmp_path / "w.csv"
        weights.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "episode,t,weight"
        assert len(lines) == 1 + 3 * 2


class TestMisValue:
    def test_zero_rewards(self):
        env = random_mdp(2, horizon=3)
        env = fq.make_tabular_env(
            env.transitions[0], np.zeros((3, 2)), env.initial_probs, 3
        )
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 200, 3)
        _, _, weights = fit_and_weights(
            env, random_table_policy(5), batch, ridge=fq.FixedRidge(0.0)
        )
        assert fq.mis_value(batch, weights) == 0.0

    def test_unit_weights_give_mean_total_reward(self):
        env = random_mdp(4, horizon=4)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 300, 9)
        weights = fq.MisWeights(
            weights=np.ones((300, 4)), propagated=tuple([None] * 4)
        )
        assert fq.mis_value(batch, weights) == pytest.approx(
            batch.rewards.sum(axis=1).mean()
        )

    @pytest.mark.parametrize("seed", range(10))
    def test_identity_with_fqe_tabular(self, seed):
        env = random_mdp(seed, horizon=4)
        target = random_table_policy(seed + 100)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 400, seed + 200)
        ridge = fq.FixedRidge(0.0) if seed % 2 else fq.TraceScaledRidge()
        model = fq.FittedQEvaluation(policy=target, ridge=ridge).fit(batch, env)
        value = model.estimate_value()
        weights = fq.compute_weights(
            batch, target, model.features_, env, model.ridge_values_
        )
        assert fq.mis_value(batch, weights) == pytest.approx(
            value, rel=1e-8, abs=1e-12
        )

    @pytest.mark.parametrize("seed", range(5))
    def test_identity_with_fqe_spline(self, seed):
        env = fq.make_spline_env(horizon=5)
        target = fq.target_policy(["a", "b", "c"][seed % 3], env)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 300, seed + 50)
        integration = QuadratureRule(301)
        model = fq.FittedQEvaluation(policy=target, k_rule=fq.FixedK(7)).fit(batch, env)
        value = model.estimate_value(integration)
        weights = fq.compute_weights(
            batch, target, model.features_, env, model.ridge_values_, integration
        )
        assert fq.mis_value(batch, weights) == pytest.approx(value, rel=1e-8)


class TestKappa:
    def make_feature_maps(self, env, horizon):
        fmap = FeatureMap(IndicatorFeatures(env.n_states).fit(None), env.n_actions)
        return [fmap] * horizon

    def test_behavior_target_near_one(self):
        env = random_mdp(11, horizon=3)
        behavior = fq.UniformRandomPolicy(2)
        b_batch = fq.simulate(env, behavior, 10**4, 1)
        pi_batch = fq.simulate(env, behavior, 10**4, 2)
        fmaps = self.make_feature_maps(env, 3)
        value = fq.kappa_hat(pi_batch, b_batch, fmaps, fq.FixedRidge(0.0))
        assert 0.9 <= value <= 1.1

    def test_matches_bruteforce_eigen_solve(self):
        rng = np.random.default_rng(0)
        trans = rng.uniform(0.2, 1.0, size=(2, 2, 2))
        trans /= trans.sum(axis=-1, keepdims=True)
        env = fq.make_tabular_env(trans, np.zeros((2, 2)), [0.6, 0.4], horizon=3)
        target = fq.TablePolicy(np.array([[0.9, 0.1], [0.2, 0.8]]))
        b_batch = fq.simulate(env, fq.UniformRandomPolicy(2), 5000, 3)
        pi_batch = fq.simulate(env, target, 5000, 4)
        fmaps = self.make_feature_maps(env, 3)
        lams = [1e-8] * 3
        ours = fq.kappa_hat(pi_batch, b_batch, fmaps, lams)
        brute = kappa_bruteforce(pi_batch, b_batch, 2, 2, lams)
        assert ours == pytest.approx(brute, abs=5e-3)

    def test_monotone_in_ridge(self):
        env = random_mdp(13, horizon=2)
        target = random_table_policy(14)
        b_batch = fq.simulate(env, fq.UniformRandomPolicy(2), 2000, 5)
        pi_batch = fq.simulate(env, target, 2000, 6)
        fmaps = self.make_feature_maps(env, 2)
        values = [
            fq.kappa_hat(pi_batch, b_batch, fmaps, fq.FixedRidge(lam))
            for lam in (0.0, 0.01, 0.1, 1.0, 10.0)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_empty_batch_rejected(self):
        env = random_mdp(15, horizon=2)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 10, 1)
        with pytest.raises(ValueError):
            fq.kappa_hat(batch, batch, [None], fq.FixedRidge(0.0))
