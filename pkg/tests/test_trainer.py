#!/usr/bin/env python3
"""Tests de l'entraînement SGD + momentum"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.data.preprocessing import LabeledDataset
from src.models.network import build_network
from src.models.trainer import (
    ClassifierTrainer, TrainConfig, accuracy, initial_network, loss_and_gradients, mean_loss,
)
from src.utils.errors import ConfigError, EmptyDatasetError, LabelRangeError


def small_data(n=20, dim=3, classes=2, seed=0):
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.uniform(size=(n, dim)), rng.integers(0, classes, size=n))


class TestGradients:
    """Rétropropagation contre différences finies"""

    def test_finite_difference(self):
        net = build_network([3, 5, 4, 3], seed=11)
        data = small_data(n=8, classes=3)
        _, grads = loss_and_gradients(net, data.X, data.y)
        h = 1e-5
        for layer, (dW, db) in zip(net.layers, grads):
            for params, analytic in ((layer.weights, dW), (layer.bias, db)):
                flat, g = params.reshape(-1), analytic.reshape(-1)
                for j in range(flat.shape[0]):
                    saved = flat[j]
                    flat[j] = saved + h
                    up, _ = loss_and_gradients(net, data.X, data.y)
                    flat[j] = saved - h
                    down, _ = loss_and_gradients(net, data.X, data.y)
                    flat[j] = saved
                    numeric = (up - down) / (2 * h)
                    rel = abs(numeric - g[j]) / max(abs(numeric) + abs(g[j]), 1e-8)
                    assert rel < 1e-4 or abs(numeric - g[j]) < 1e-9


class TestClassifierTrainer:
    """Entraînement complet"""

    def test_zero_learning_rate_keeps_initial_weights(self):
        cfg = TrainConfig(learning_rate=0.0, epochs=2, batch_size=4, seed=9)
        data = small_data()
        net, _ = ClassifierTrainer(cfg).train(data, [3, 4, 2])
        init = initial_network([3, 4, 2], cfg)
        for a, b in zip(net.layers, init.layers):
            np.testing.assert_array_equal(a.weights, b.weights)

    def test_deterministic(self):
        cfg = TrainConfig(learning_rate=0.05, epochs=3, batch_size=4, seed=1)
        data = small_data()
        a, _ = ClassifierTrainer(cfg).train(data, [3, 4, 2])
        b, _ = ClassifierTrainer(cfg).train(data, [3, 4, 2])
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)

    def test_blobs_are_learned(self, blobs):
        cfg = TrainConfig(learning_rate=0.1, momentum=0.9, batch_size=8, epochs=20, seed=3)
        net, history = ClassifierTrainer(cfg).train(blobs, [2, 16, 2])
        assert len(history["loss"]) == 20
        assert accuracy(net, blobs) >= 0.99

    def test_loss_below_initial_loss(self, blobs):
        cfg = TrainConfig(learning_rate=0.05, momentum=0.9, batch_size=32, epochs=5, seed=4)
        initial = mean_loss(initial_network([2, 16, 2], cfg), blobs)
        _, history = ClassifierTrainer(cfg).train(blobs, [2, 16, 2])
        assert history["loss"][-1] < initial

    def test_empty_dataset(self):
        empty = LabeledDataset(np.zeros((0, 3)), np.zeros(0))
        with pytest.raises(EmptyDatasetError):
            ClassifierTrainer(TrainConfig()).train(empty, [3, 2])

    def test_label_out_of_range(self):
        data = small_data(classes=3)
        with pytest.raises(LabelRangeError):
            ClassifierTrainer(TrainConfig(epochs=1)).train(data, [3, 2])

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            TrainConfig.build(momentum=1.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            ClassifierTrainer(TrainConfig(epochs=1)).train(small_data(dim=4), [3, 2])


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
