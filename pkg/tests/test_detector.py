#!/usr/bin/env python3
"""Tests du détecteur F_Q : génération du jeu, entraînement, taux FP/FN"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.defense.detector import (
    ADVERSARIAL, CLEAN, FQDataset, FQTrainConfig, SamplerConfig, fq_metrics,
    generate_fq_dataset, train_fq,
)
from src.defense.predcoin import DefenseState, top3_batch
from src.models.network import build_network
from src.utils.errors import DegenerateDataError, EmptyDatasetError


class TestGeneration:
    """Échantillonnage G(x*) autour de la frontière de la cible"""

    def test_balanced_and_sorted(self, blobs, blob_target):
        data = blobs.head(40)
        fq = generate_fq_dataset(blob_target, data, SamplerConfig(n_sphere=3),
                                 np.random.default_rng(0))
        n_clean = int(np.sum(fq.labels == CLEAN))
        n_adv = int(np.sum(fq.labels == ADVERSARIAL))
        assert n_clean == 40
        assert 0 < n_adv <= n_clean
        assert fq.features.shape == (n_clean + n_adv, 3)
        assert np.all(np.diff(fq.features, axis=1) <= 0)
        # deux classes : la troisième composante est le zéro de complétion
        np.testing.assert_array_equal(fq.features[:, 2], 0.0)

    def test_clean_rows_are_target_top3(self, blobs, blob_target):
        data = blobs.head(25)
        fq = generate_fq_dataset(blob_target, data, SamplerConfig(n_sphere=2),
                                 np.random.default_rng(2))
        clean = fq.features[fq.labels == CLEAN]
        np.testing.assert_array_equal(clean, top3_batch(blob_target.forward_batch(data.X)))

    def test_boundary_points_are_uncertain(self, blobs, blob_target):
        fq = generate_fq_dataset(blob_target, blobs.head(30), SamplerConfig(n_sphere=0),
                                 np.random.default_rng(1))
        adv_top1 = fq.features[fq.labels == ADVERSARIAL, 0]
        clean_top1 = fq.features[fq.labels == CLEAN, 0]
        assert np.median(adv_top1) < np.median(clean_top1)
        assert np.all(adv_top1 < 0.9)

    def test_save_and_load(self, tmp_path):
        fq = FQDataset(np.array([[0.9, 0.1, 0.0]]), np.array([CLEAN]), n_skipped=2)
        loaded = FQDataset.load(fq.save(tmp_path / "fq_data.npz"))
        np.testing.assert_array_equal(loaded.features, fq.features)
        assert loaded.n_skipped == 2


class TestTraining:
    """Entraînement et métriques de F_Q"""

    def test_detector_separates_boundary_queries(self, blobs, blob_target):
        fq = generate_fq_dataset(blob_target, blobs.head(200), SamplerConfig(n_sphere=0),
                                 np.random.default_rng(2))
        cfg = FQTrainConfig(learning_rate=0.1, batch_size=32, epochs=150, seed=5)
        net, metrics = train_fq(fq, cfg)
        assert net.arch == [3, 64, 64, 32, 2]
        assert metrics.accuracy >= 0.85

    def test_single_class_rejected(self):
        fq = FQDataset(np.tile([0.9, 0.1, 0.0], (10, 1)), np.full(10, CLEAN))
        with pytest.raises(DegenerateDataError):
            train_fq(fq, FQTrainConfig(epochs=1))

    def test_empty_rejected(self):
        with pytest.raises(EmptyDatasetError):
            train_fq(FQDataset(np.empty((0, 3)), np.empty(0, dtype=np.int64)), FQTrainConfig())

    def test_metrics_from_confusion(self, threshold_detector):
        ds = DefenseState(build_network([4, 3], seed=0), threshold_detector(0.75), 0.5)
        eval_set = FQDataset(
            np.array([[0.6, 0.4, 0.0], [0.9, 0.1, 0.0], [0.55, 0.45, 0.0], [0.95, 0.05, 0.0]]),
            np.array([ADVERSARIAL, ADVERSARIAL, CLEAN, CLEAN]),
        )
        m = fq_metrics(ds, eval_set)
        assert (m.tp, m.fn, m.fp, m.tn) == (1, 1, 1, 1)
        assert m.fp_rate == pytest.approx(0.5)
        assert m.fn_rate == pytest.approx(0.5)
        assert m.accuracy == pytest.approx(0.5)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
