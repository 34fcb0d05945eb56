#!/usr/bin/env python3
"""Tests de la recherche du seuil γ"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.defense.gamma import gamma_search, gamma_sweep
from src.utils.errors import ConfigError


class TestGammaSearch:
    """Dichotomie sur un Δacc synthétique"""

    def test_synthetic_loss_curve(self):
        calls = []

        def evaluator(gamma):
            calls.append(gamma)
            return max(0.0, 0.5 - gamma)

        result = gamma_search(None, None, acc_loss_cap=0.1, tol=0.01, evaluator=evaluator)
        assert result.feasible
        assert result.gamma == pytest.approx(0.4, abs=0.01)
        assert result.iterations <= 7
        assert result.bracket[1] - result.bracket[0] < 0.01
        # γ = 1 est évalué en premier
        assert calls[0] == 1.0

    def test_returned_gamma_respects_cap(self):
        result = gamma_search(None, None, acc_loss_cap=0.05, tol=0.01,
                              evaluator=lambda g: 0.3 * (1.0 - g))
        assert 0.3 * (1.0 - result.gamma) <= 0.05

    def test_infeasible(self):
        result = gamma_search(None, None, acc_loss_cap=0.1, evaluator=lambda g: 0.5)
        assert not result.feasible
        assert result.gamma == 1.0
        assert result.iterations == 0

    def test_invalid_cap(self):
        with pytest.raises(ConfigError):
            gamma_search(None, None, acc_loss_cap=0.0, evaluator=lambda g: 0.0)

    def test_real_defense_stays_under_cap(self, blobs, blob_target, make_defense):
        ds = make_defense(blob_target, tau=0.99)
        result = gamma_search(ds, blobs, acc_loss_cap=0.05, eval_seed=3)
        assert result.feasible
        final = [loss for g, loss in result.history if g == result.gamma]
        assert final and final[-1] <= 0.05


class TestGammaSweep:
    """Balayage du compromis"""

    def test_columns_and_extremes(self, blobs, blob_target, make_defense):
        ds = make_defense(blob_target, tau=0.99)
        frame = gamma_sweep(ds, blobs, [0.0, 0.5, 1.0], eval_seed=0)
        assert list(frame.columns) == ["gamma", "acc_loss", "acc_loss_se", "flag_rate"]
        assert frame.loc[0, "flag_rate"] == 1.0
        assert frame.loc[2, "flag_rate"] == 0.0
        assert frame.loc[2, "acc_loss"] == 0.0
        assert np.all(np.diff(frame["flag_rate"].to_numpy()) <= 0)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
