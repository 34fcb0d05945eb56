"""Fixtures partagées : oracles analytiques, détecteur à seuil, petite cible sur blobs"""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from config.settings import MNIST_FILES
from src.data.preprocessing import make_blobs
from src.defense.predcoin import DefenseState, FlipMode
from src.models.network import Activation, DenseLayer, DenseNetwork
from src.models.trainer import ClassifierTrainer, TrainConfig
from src.oracle.models import LinearModel, QuadraticModel


def make_threshold_detector(tau: float, sharpness: float = 50.0) -> DenseNetwork:
    """
    F_Q construit à la main : y1 = 1 / (1 + exp(2a(top1 − τ))).

    Avec γ = 0.5, une requête est signalée ssi top1 <= τ.
    """
    a = sharpness
    layer = DenseLayer(
        weights=np.array([[-a, 0.0, 0.0], [a, 0.0, 0.0]]),
        bias=np.array([tau * a, -tau * a]),
        activation=Activation.SOFTMAX,
    )
    return DenseNetwork([layer])


@pytest.fixture
def threshold_detector():
    return make_threshold_detector


@pytest.fixture
def linear_model():
    """S(x) = w·x + b en dimension 10, hyperplan passant près du centre du cube"""
    rng = np.random.default_rng(7)
    w = rng.standard_normal(10)
    w /= np.linalg.norm(w)
    return LinearModel(w, -float(w @ np.full(10, 0.5)) + 0.05, kappa=10.0, bounded=True)


@pytest.fixture
def quadratic_model():
    return QuadraticModel(np.full(20, 0.5), 0.3, kappa=10.0, bounded=True)


@pytest.fixture(scope="session")
def blobs():
    return make_blobs(n_per_class=200, dim=2, seed=0)


@pytest.fixture(scope="session")
def blob_target(blobs):
    """Petit MLP 2-16-2 entraîné sur les blobs"""
    cfg = TrainConfig(learning_rate=0.1, momentum=0.9, batch_size=32, epochs=40, seed=3)
    net, _ = ClassifierTrainer(cfg).train(blobs, [2, 16, 2])
    return net


@pytest.fixture
def make_defense():
    def factory(target, tau=0.75, gamma=0.5, mode=FlipMode.PROBABILISTIC, seed=0, **kwargs):
        return DefenseState(target, make_threshold_detector(tau), gamma, mode, seed, **kwargs)
    return factory


def mnist_available() -> bool:
    return all(
        Path(p).exists() or Path(str(p) + ".gz").exists() for p in MNIST_FILES.values()
    )


requires_mnist = pytest.mark.skipif(not mnist_available(), reason="fichiers MNIST absents")
