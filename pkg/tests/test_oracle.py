#!/usr/bin/env python3
"""Tests des oracles hard-label et des modèles analytiques"""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.models.network import build_network
from src.oracle.models import LinearModel, QuadraticModel
from src.oracle.oracles import HardLabelOracle
from src.utils.errors import DimensionMismatchError, UnsupportedOperationError


class TestAnalyticModels:
    """Marges et gradients exacts"""

    def test_linear_label_is_sign_of_margin(self):
        model = LinearModel([1.0, -1.0], 0.0, kappa=1e6)
        assert model.label_batch(np.array([[0.5, 0.5]]))[0] == 0
        assert model.label_batch(np.array([[0.6, 0.5]]))[0] == 1

    def test_quadratic_gradient_and_boundary(self):
        model = QuadraticModel(np.full(3, 0.5), 0.2)
        x = model.boundary_point(np.array([1.0, 0.0, 0.0]))
        assert model.margin(x) == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(model.gradient(x), [-0.4, 0.0, 0.0])
        assert model.lipschitz == 2.0

    def test_linear_distances(self, linear_model):
        x = np.full(10, 0.2)
        projected = linear_model.project(x)
        assert linear_model.margin(projected) == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(projected - x) == pytest.approx(linear_model.l2_distance_to_boundary(x))

    @given(arrays(np.float64, 4, elements=st.floats(-3, 3, allow_nan=False)))
    @settings(max_examples=100, deadline=None)
    def test_phi_is_sign_of_margin(self, x):
        model = LinearModel([0.3, -0.2, 0.5, 0.1], 0.05)
        oracle = HardLabelOracle(model)
        phi = oracle.phi(np.zeros(4), 0, x)
        assert phi == (1 if model.margin(x) > 0 else -1)


class TestHardLabelOracle:
    """Comptage des requêtes et dimensions"""

    def test_query_count(self):
        oracle = HardLabelOracle(build_network([4, 3], seed=0))
        oracle.query_labels(np.zeros((7, 4)))
        oracle.query_label(np.zeros(4))
        assert oracle.query_count == 8

    def test_dimension_mismatch(self):
        oracle = HardLabelOracle(build_network([4, 3], seed=0))
        with pytest.raises(DimensionMismatchError):
            oracle.query_label(np.zeros(5))

    def test_network_inputs_are_clipped(self):
        oracle = HardLabelOracle(build_network([2, 2], seed=0))
        np.testing.assert_array_equal(oracle.clip(np.array([-1.0, 2.0])), [0.0, 1.0])

    def test_unbounded_analytic_is_not_clipped(self):
        oracle = HardLabelOracle(LinearModel([1.0, 1.0], 0.0))
        np.testing.assert_array_equal(oracle.clip(np.array([-1.0, 2.0])), [-1.0, 2.0])

    def test_analytic_gradient_only_for_analytic(self):
        with pytest.raises(UnsupportedOperationError):
            HardLabelOracle(build_network([2, 2], seed=0)).analytic_margin_gradient(np.zeros(2))
        margin, grad = HardLabelOracle(LinearModel([1.0, 2.0], 0.5)).analytic_margin_gradient(np.ones(2))
        assert margin == pytest.approx(3.5)
        np.testing.assert_array_equal(grad, [1.0, 2.0])


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
