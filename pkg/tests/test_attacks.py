#!/usr/bin/env python3
"""Tests des attaques hard-label sur l'oracle linéaire (distances exactes connues)"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.attacks import ATTACKS, get_attack
from src.attacks.primitives import (
    AttackConfig, QueryTracker, bisect_to_boundary, estimate_gradient, sample_unit_sphere,
)
from src.oracle.oracles import HardLabelOracle
from src.theory.verification import cos_angle
from src.utils.errors import (
    BudgetExhaustedError, ConfigError, NotAdversarialError, UnsupportedOperationError,
)

X_STAR = np.full(10, 0.5)


def setup(linear_model):
    oracle = HardLabelOracle(linear_model)
    return oracle, X_STAR.copy(), oracle.query_label(X_STAR)


class TestPrimitives:
    """Estimation du gradient et dichotomie"""

    def test_estimate_consumes_exactly_B(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        x_t = linear_model.project(x_star)
        before = oracle.query_count
        est = estimate_gradient(oracle, x_star, c_star, x_t, 1e-3, 500, np.random.default_rng(0))
        assert oracle.query_count - before == 500
        assert est.queries == 500
        # c_star = 1 : le côté adversarial est S <= 0, donc -w
        assert cos_angle(est.direction, -linear_model.w) > 0.8

    def test_budget_exhausted_reports_partial(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        tracker = QueryTracker(oracle, 51)
        with pytest.raises(BudgetExhaustedError) as err:
            estimate_gradient(oracle, x_star, c_star, linear_model.project(x_star), 1e-3, 100,
                              np.random.default_rng(0), tracker)
        assert err.value.queries_spent == 50
        assert err.value.partial.shape == (10,)

    def test_bisection_stays_adversarial(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        far = x_star - 0.3 * linear_model.w
        x_b = bisect_to_boundary(oracle, x_star, c_star, far, 1e-4)
        assert oracle.phi(x_star, c_star, x_b) == 1
        exact = linear_model.l2_distance_to_boundary(x_star)
        assert np.linalg.norm(x_b - x_star) == pytest.approx(exact, rel=1e-3)

    def test_bisection_rejects_clean_start(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        with pytest.raises(NotAdversarialError):
            bisect_to_boundary(oracle, x_star, c_star, x_star + 0.01 * linear_model.w, 1e-3)

    def test_bisection_query_count(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        far = x_star - 0.3 * linear_model.w
        before = oracle.query_count
        bisect_to_boundary(oracle, x_star, c_star, far, 0.01)
        assert oracle.query_count - before <= 8

    def test_single_sample_is_plus_or_minus_u(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        x_t = linear_model.project(x_star)
        u1 = sample_unit_sphere(np.random.default_rng(3), 1, 10)[0]
        est = estimate_gradient(oracle, x_star, c_star, x_t, 1e-3, 1, np.random.default_rng(3))
        assert np.linalg.norm(est.direction) == pytest.approx(1.0, abs=1e-12)
        sign = 1.0 if est.direction @ u1 > 0 else -1.0
        np.testing.assert_allclose(est.direction, sign * u1, atol=1e-12)


class TestUnitSphere:
    """Tirages uniformes sur la sphère"""

    @given(st.integers(1, 200), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_unit_norm(self, dim, seed):
        u = sample_unit_sphere(np.random.default_rng(seed), 64, dim)
        np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-9)

    def test_mean_is_near_zero(self):
        u = sample_unit_sphere(np.random.default_rng(0), 1_000_000, 5)
        assert np.linalg.norm(u.mean(axis=0)) <= 5e-3


class TestAttacksOnLinearOracle:
    """Distances atteintes contre l'optimum analytique"""

    @pytest.mark.parametrize("name,factor", [("hsja", 1.2), ("ba", 1.5), ("signopt", 1.3)])
    def test_l2_close_to_hyperplane(self, linear_model, name, factor):
        oracle, x_star, c_star = setup(linear_model)
        cfg = AttackConfig(norm="l2", query_budget=5000, seed=1)
        result = get_attack(name)(oracle, x_star, c_star, cfg)
        exact = linear_model.l2_distance_to_boundary(x_star)
        assert result.success
        assert result.queries_used <= 5000
        assert result.l2_dist <= factor * exact

    def test_sfa_close_to_linf_optimum(self, linear_model):
        oracle, x_star, c_star = setup(linear_model)
        cfg = AttackConfig(norm="linf", query_budget=5000, seed=1)
        result = get_attack("sfa")(oracle, x_star, c_star, cfg)
        assert result.success
        assert result.linf_dist <= 1.5 * linear_model.linf_distance_to_boundary(x_star)

    @pytest.mark.parametrize("name", ["hsja", "ba", "signopt"])
    def test_trace_is_non_increasing(self, linear_model, name):
        oracle, x_star, c_star = setup(linear_model)
        result = get_attack(name)(oracle, x_star, c_star, AttackConfig(query_budget=1500, seed=2))
        distances = [d for _, d in result.trace]
        assert all(b <= a + 1e-12 for a, b in zip(distances, distances[1:]))

    @pytest.mark.parametrize("name", list(ATTACKS))
    def test_budget_is_respected(self, linear_model, name):
        oracle, x_star, c_star = setup(linear_model)
        norm = "linf" if name == "sfa" else "l2"
        before = oracle.query_count
        result = get_attack(name)(oracle, x_star, c_star,
                                  AttackConfig(norm=norm, query_budget=300, seed=0))
        assert result.queries_used <= 300
        assert oracle.query_count - before == result.queries_used

    @pytest.mark.parametrize("name", list(ATTACKS))
    def test_zero_budget_fails(self, linear_model, name):
        oracle, x_star, c_star = setup(linear_model)
        norm = "linf" if name == "sfa" else "l2"
        result = get_attack(name)(oracle, x_star, c_star,
                                  AttackConfig(norm=norm, query_budget=0, seed=0))
        assert not result.success
        assert result.x_adv is None
        assert math.isinf(result.l2_dist)

    @pytest.mark.parametrize("name", list(ATTACKS))
    def test_same_seed_same_result(self, linear_model, name):
        norm = "linf" if name == "sfa" else "l2"
        cfg = AttackConfig(norm=norm, query_budget=400, seed=7)
        a = get_attack(name)(*setup(linear_model), cfg)
        b = get_attack(name)(*setup(linear_model), cfg)
        assert a.l2_dist == b.l2_dist
        assert a.queries_used == b.queries_used

    def test_signopt_linf_unsupported(self, linear_model):
        with pytest.raises(UnsupportedOperationError):
            get_attack("signopt")(*setup(linear_model), AttackConfig(norm="linf"))

    def test_unknown_attack(self):
        with pytest.raises(ConfigError):
            get_attack("square")


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
