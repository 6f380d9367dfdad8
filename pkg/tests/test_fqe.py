import json

import numpy as np
import pytest

import fqeval as fq
from fqeval.quadrature import MonteCarloRule, QuadratureRule
from oracles import dp_q_tables, dp_value, empirical_dp_value


def single_cell_env(reward=0.5, horizon=2):
    return fq.make_tabular_env(
        np.ones((1, 1, 1)), np.full((1, 1), reward), [1.0], horizon=horizon
    )


def random_mdp(seed, n_states=3, n_actions=2, horizon=5):
    rng = np.random.default_rng(seed)
    trans = rng.uniform(0.1, 1.0, size=(n_states, n_actions, n_states))
    trans /= trans.sum(axis=-1, keepdims=True)
    rewards = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    p0 = rng.uniform(0.2, 1.0, size=n_states)
    p0 /= p0.sum()
    return fq.make_tabular_env(trans, rewards, p0, horizon=horizon)


def random_table_policy(seed, n_states=3, n_actions=2):
    rng = np.random.default_rng(seed)
    table = rng.uniform(0.2, 1.0, size=(n_states, n_actions))
    table /= table.sum(axis=1, keepdims=True)
    return fq.TablePolicy(table, name="tabular")


class TestTabularFit:
    def test_single_cell_bellman_backup(self):
        env = single_cell_env()
        policy = fq.UniformRandomPolicy(n_actions=1)
        batch = fq.simulate(env, policy, 10, 0)
        model = fq.FittedQEvaluation(policy=policy, ridge=fq.FixedRidge(0.0))
        model.fit(batch, env)
        assert model.q_value(1, 0, 0) == pytest.approx(0.5, abs=1e-12)
        assert model.q_value(0, 0, 0) == pytest.approx(1.0, abs=1e-12)
        assert model.estimate_value() == pytest.approx(1.0, abs=1e-12)

    def test_zero_rewards_give_zero_model(self):
        env = random_mdp(0)
        env = fq.make_tabular_env(
            env.transitions[0], np.zeros((3, 2)), env.initial_probs, env.horizon
        )
        policy = random_table_policy(1)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 500, 3)
        model = fq.FittedQEvaluation(policy=policy).fit(batch, env)
        for beta in model.coef_:
            assert np.allclose(beta, 0.0)
        assert model.estimate_value() == 0.0

    def test_close_to_true_dp_at_large_n(self):
        env = random_mdp(7)
        policy = random_table_policy(8)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 5000, 11)
        model = fq.FittedQEvaluation(policy=policy, ridge=fq.FixedRidge(0.0))
        model.fit(batch, env)
        tables = dp_q_tables(env, policy)
        for t in range(env.horizon):
            fitted = np.array(
                [model.q_value(t, s, a) for s in range(3) for a in range(2)]
            )
            assert np.max(np.abs(fitted - tables[t].reshape(-1))) < 0.05

    def test_equals_empirical_model_dp_exactly(self):
        env = random_mdp(12)
        policy = random_table_policy(13)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 2000, 17)
        model = fq.FittedQEvaluation(policy=policy, ridge=fq.FixedRidge(0.0))
        model.fit(batch, env)
        nu = model.estimate_value()
        assert nu == pytest.approx(empirical_dp_value(batch, env, policy), abs=1e-10)

    def test_bellman_residual_orthogonality(self):
        env = random_mdp(20)
        policy = random_table_policy(21)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 800, 23)
        model = fq.FittedQEvaluation(policy=policy, ridge=fq.FixedRidge(0.0))
        model.fit(batch, env)
        n = batch.n_episodes
        for t in range(env.horizon):
            phi = model.features_[t].features(batch.states[:, t], batch.actions[:, t])
            if t == env.horizon - 1:
                y = batch.rewards[:, t]
            else:
                probs = policy.action_probs(t + 1, batch.states[:, t + 1])
                cont = model.features_[t + 1].policy_features(
                    batch.states[:, t + 1], probs
                ) @ model.coef_[t + 1]
                y = batch.rewards[:, t] + cont
            resid = phi.T @ (y - phi @ model.coef_[t])
            assert np.max(np.abs(resid)) < 1e-8 * n


class TestSplineFit:
    def test_horizon_mismatch_rejected(self):
        env = fq.make_spline_env(horizon=4)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 30, 1)
        other = fq.make_spline_env(horizon=5)
        with pytest.raises(ValueError, match="horizon"):
            fq.FittedQEvaluation(policy=fq.target_policy("a", other)).fit(batch, other)

    def test_q_values_match_manual_dot(self):
        env = fq.make_spline_env(horizon=3)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 300, 5)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("b", env), k_rule=fq.FixedK(6)
        ).fit(batch, env)
        s, a = 0.37, 1
        manual = model.features_[1].feature_vector(s, a) @ model.coef_[1]
        assert model.q_value(1, s, a) == pytest.approx(manual, abs=1e-14)

    def test_step_out_of_range(self):
        env = fq.make_spline_env(horizon=3)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 100, 2)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("a", env), k_rule=fq.FixedK(5)
        ).fit(batch, env)
        with pytest.raises(IndexError):
            model.q_value(3, 0.0, 0)
        with pytest.raises(IndexError):
            model.q_value(-1, 0.0, 0)

    def test_singular_fit_names_failing_step(self):
        env = fq.make_spline_env(horizon=3)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 12, 2)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("a", env),
            k_rule=fq.FixedK(30),
            ridge=fq.FixedRidge(0.0),
        )
        with pytest.raises(fq.SingularDesignError, match="step 2"):
            model.fit(batch, env)

    def test_loocv_rule_varies_k_per_step(self):
        env = fq.make_spline_env(horizon=4)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 500, 9)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("a", env), k_rule=fq.LoocvK()
        ).fit(batch, env)
        assert len(model.k_per_step_) == 4
        cands = set(fq.loocv_candidates(fq.LoocvK(), 500))
        assert set(model.k_per_step_) <= cands


class TestEstimateValue:
    def test_constant_q_integrates_to_constant(self):
        env = fq.make_spline_env(horizon=2)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 200, 3)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("b", env), k_rule=fq.FixedK(5)
        ).fit(batch, env)
        c = 2.75
        model.coef_[0] = np.full(model.features_[0].n_features, c)
        assert model.estimate_value() == pytest.approx(c, abs=1e-12)
        mc = model.estimate_value(MonteCarloRule(draws=500, seed=4))
        assert mc == pytest.approx(c, abs=1e-12)

    def test_quadrature_refinement_agreement(self):
        # piecewise-polynomial integrand (uniform action weights): the
        # composite rule is already exact at the default budget
        env = fq.make_spline_env(horizon=3)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 400, 6)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("a", env), k_rule=fq.FixedK(8)
        ).fit(batch, env)
        coarse = model.estimate_value(QuadratureRule(201))
        fine = model.estimate_value(QuadratureRule(2001))
        assert coarse == pytest.approx(fine, abs=1e-10)

    def test_quadrature_refinement_smooth_weights(self):
        # logistic action weights are analytic, not polynomial; agreement is
        # still far below any statistical scale
        env = fq.make_spline_env(horizon=3)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 400, 6)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("b", env), k_rule=fq.FixedK(8)
        ).fit(batch, env)
        coarse = model.estimate_value(QuadratureRule(201))
        fine = model.estimate_value(QuadratureRule(2001))
        assert coarse == pytest.approx(fine, abs=1e-8)

    def test_tabular_exact_summation(self):
        env = random_mdp(30)
        policy = random_table_policy(31)
        batch = fq.simulate(env, fq.UniformRandomPolicy(2), 3000, 33)
        model = fq.FittedQEvaluation(policy=policy, ridge=fq.FixedRidge(0.0))
        model.fit(batch, env)
        probs = policy.action_probs(0, np.arange(3))
        manual = sum(
            env.initial_probs[s] * probs[s, a] * model.q_value(0, s, a)
            for s in range(3)
            for a in range(2)
        )
        assert model.estimate_value() == pytest.approx(manual, abs=1e-12)

    def test_value_stored_on_model(self):
        env = single_cell_env()
        policy = fq.UniformRandomPolicy(n_actions=1)
        batch = fq.simulate(env, policy, 5, 0)
        model = fq.FittedQEvaluation(policy=policy).fit(batch, env)
        value = model.estimate_value()
        assert model.value_ == value

    def test_centering_improves_with_n(self):
        # target (a) has true value 0; replicate-averaged |estimate| shrinks
        env = fq.make_spline_env(horizon=5)
        behavior = fq.target_policy("behavior", env)
        target = fq.target_policy("a", env)

        def mean_abs(n, reps=10):
            vals = []
            for r in range(reps):
                batch = fq.simulate(env, behavior, n, fq.derive_seed(5, n, r))
                m = fq.FittedQEvaluation(policy=target, k_rule=fq.FixedK(8))
                vals.append(abs(m.fit(batch, env).estimate_value()))
            return np.mean(vals)

        assert mean_abs(4000) < mean_abs(1000)


class TestModelJson:
    def test_schema(self, tmp_path):
        env = fq.make_spline_env(horizon=3)
        batch = fq.simulate(env, fq.target_policy("behavior", env), 150, 8)
        model = fq.FittedQEvaluation(
            policy=fq.target_policy("b", env), k_rule=fq.FixedK(5)
        ).fit(batch, env)
        model.estimate_value()
        path = tmp_path / "model.json"
        model.to_json(path)
        doc = json.loads(path.read_text())
        assert doc["T"] == 3
        assert len(doc["steps"]) == 3
        step = doc["steps"][0]
        assert set(step) == {"K", "knots", "beta"}
        assert step["K"] == 5
        assert len(step["beta"]) == 10
        assert len(step["knots"]) == 5 + 3 + 1
        assert doc["value"] == pytest.approx(model.value_)

    def test_tabular_knots_null(self):
        env = single_cell_env()
        policy = fq.UniformRandomPolicy(n_actions=1)
        batch = fq.simulate(env, policy, 5, 0)
        model = fq.FittedQEvaluation(policy=policy).fit(batch, env)
        doc = json.loads(model.to_json())
        assert doc["steps"][0]["knots"] is None
