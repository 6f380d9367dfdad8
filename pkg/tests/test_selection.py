import numpy as np
import pytest

import fqeval as fq
from fqeval.basis import BSplineFeatures
from fqeval.regression import FixedRidge
from fqeval.selection import (
    k_rule_label,
    loocv_candidates,
    parse_k_rule,
    select_k_loocv,
)


class TestResolveK:
    def test_rule_of_thumb_example(self):
        # 3 * 2000**0.2 = 13.72 -> 14
        assert fq.resolve_k(fq.RuleOfThumbK(c=3.0, exponent=0.2), 2000) == 14

    def test_lower_clamp(self):
        assert fq.resolve_k(fq.RuleOfThumbK(c=3.0, exponent=0.2), 1) == 4

    def test_fixed(self):
        assert fq.resolve_k(fq.FixedK(k=10), 12345) == 10

    def test_monotone_in_n(self):
        rule = fq.RuleOfThumbK(c=3.0, exponent=0.2)
        ks = [fq.resolve_k(rule, n) for n in range(1, 5001, 50)]
        assert all(a <= b for a, b in zip(ks, ks[1:]))

    def test_loocv_rule_rejected(self):
        with pytest.raises(TypeError):
            fq.resolve_k(fq.LoocvK(), 100)


class TestCandidates:
    def test_default_grid_capped(self):
        assert loocv_candidates(fq.LoocvK(), 400) == [4, 6, 8, 11, 14, 18]
        assert loocv_candidates(fq.LoocvK(), 2000) == [4, 6, 8, 11, 14, 18, 23, 30]

    def test_small_n_falls_back_to_minimum(self):
        assert loocv_candidates(fq.LoocvK(), 50) == [4]

    def test_custom_candidates(self):
        assert loocv_candidates(fq.LoocvK(candidates=(5, 9)), 10**4) == [5, 9]

    def test_candidate_below_degree_rejected(self):
        with pytest.raises(ValueError):
            loocv_candidates(fq.LoocvK(candidates=(3, 8)), 100)


class TestSelectKLoocv:
    def make_problem(self, seed, n=2000, noise=0.01, signal_k=6):
        rng = np.random.default_rng(seed)
        states = rng.uniform(-2, 2, n)
        actions = rng.integers(0, 2, n)
        basis = BSplineFeatures(n_basis=signal_k).fit(states)
        coef = rng.normal(size=(signal_k, 2))
        psi = basis.transform(states)
        y = psi @ coef[:, 0] * (actions == 0) + psi @ coef[:, 1] * (actions == 1)
        return states, y + noise * rng.normal(size=n), actions

    def test_recovers_generating_size_by_majority(self):
        wins = 0
        for seed in range(20):
            states, y, actions = self.make_problem(seed)
            k = select_k_loocv(states, y, actions, [4, 6, 12], FixedRidge(0.0), 2)
            wins += k == 6
        assert wins > 10

    def test_singleton(self):
        states, y, actions = self.make_problem(0)
        assert select_k_loocv(states, y, actions, [8], FixedRidge(0.0), 2) == 8

    def test_zero_targets_tie_break_smallest(self):
        rng = np.random.default_rng(1)
        states = rng.uniform(-1, 1, 200)
        actions = rng.integers(0, 2, 200)
        k = select_k_loocv(states, np.zeros(200), actions, [4, 6, 8], FixedRidge(0.0), 2)
        assert k == 4

    def test_returns_member_and_deterministic(self):
        states, y, actions = self.make_problem(3)
        cands = [5, 7, 13]
        k1 = select_k_loocv(states, y, actions, cands, FixedRidge(1e-8), 2)
        k2 = select_k_loocv(states, y, actions, cands, FixedRidge(1e-8), 2)
        assert k1 == k2
        assert k1 in cands

    def test_empty_candidates(self):
        with pytest.raises(ValueError):
            select_k_loocv(np.ones(10), np.ones(10), np.zeros(10, dtype=int), [], FixedRidge(0.0), 2)


class TestParsingAndLabels:
    def test_parse(self):
        assert parse_k_rule("10") == fq.FixedK(k=10)
        assert parse_k_rule("rot:3") == fq.RuleOfThumbK(c=3.0, exponent=0.2)
        assert parse_k_rule("rot:2:0.25") == fq.RuleOfThumbK(c=2.0, exponent=0.25)
        assert parse_k_rule("loocv") == fq.LoocvK()

    def test_parse_errors(self):
        with pytest.raises(ValueError):
            parse_k_rule("huh")
        with pytest.raises(ValueError):
            parse_k_rule("rot:1:2:3")

    def test_labels(self):
        assert k_rule_label(fq.FixedK(k=9)) == "fixed:9"
        assert k_rule_label(fq.RuleOfThumbK()) == "rot:3:0.2"
        assert k_rule_label(fq.LoocvK()) == "loocv"
