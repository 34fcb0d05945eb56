import logging
import sys
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError
from tqdm import tqdm

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import TRAIN_CONFIG
from src.data.preprocessing import LabeledDataset
from src.models.network import Activation, DenseNetwork, build_network
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Hyperparamètres SGD + momentum"""
    learning_rate: float = Field(default=TRAIN_CONFIG["learning_rate"], ge=0.0)
    momentum: float = Field(default=TRAIN_CONFIG["momentum"], ge=0.0, lt=1.0)
    batch_size: int = Field(default=TRAIN_CONFIG["batch_size"], ge=1)
    epochs: int = Field(default=TRAIN_CONFIG["epochs"], ge=1)
    seed: int = Field(default=TRAIN_CONFIG["seed"], ge=0, lt=2**64)

    @classmethod
    def build(cls, **kwargs) -> "TrainConfig":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise ConfigError(str(e)) from e


def loss_and_gradients(net: DenseNetwork, X: np.ndarray, y: np.ndarray
                       ) -> Tuple[float, List[Tuple[np.ndarray, np.ndarray]]]:
    """
    Entropie croisée moyenne et ses gradients (dW, db) par couche.

    La sortie softmax combinée à l'entropie croisée donne dZ = (P - Y) / n.
    """
    activations = net.forward_layers(X)
    probs = activations[-1]
    n = X.shape[0]
    rows = np.arange(n)
    loss = float(-np.mean(np.log(np.clip(probs[rows, y], 1e-300, None))))

    delta = probs.copy()
    delta[rows, y] -= 1.0
    delta /= n

    grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        a_prev = activations[i]
        grads[i] = (delta.T @ a_prev, delta.sum(axis=0))
        if i == 0:
            break
        delta = delta @ net.layers[i].weights
        prev_act = net.layers[i - 1].activation
        if prev_act is Activation.RELU:
            delta = delta * (a_prev > 0.0)
        elif prev_act is Activation.SOFTMAX:
            raise ConfigError("softmax interdit dans les couches cachées")
    return loss, grads


def mean_loss(net: DenseNetwork, data: LabeledDataset) -> float:
    probs = net.forward_batch(data.X)
    return float(-np.mean(np.log(np.clip(probs[np.arange(len(data)), data.y], 1e-300, None))))


def accuracy(net: DenseNetwork, data: LabeledDataset) -> float:
    return float(np.mean(net.predict_labels(data.X) == data.y))


class ClassifierTrainer:
    """Entraînement mini-batch SGD + momentum, reproductible à graine fixe"""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg

    def train(self, data: LabeledDataset, arch: Sequence[int], net: DenseNetwork = None
              ) -> Tuple[DenseNetwork, Dict[str, list]]:
        """
        Entraîne un réseau sur `data`.

        Returns:
            (réseau, historique) où l'historique contient la perte et l'accuracy par epoch
        """
        data.check(n_classes=int(arch[-1]))
        if data.dim != arch[0]:
            raise ConfigError(f"dimension des données {data.dim} != entrée du réseau {arch[0]}")

        init_seq, shuffle_seq = np.random.SeedSequence(self.cfg.seed).spawn(2)
        if net is None:
            net = build_network(arch, self.cfg.seed, rng=np.random.default_rng(init_seq))
        else:
            net = net.copy()
        shuffle_rng = np.random.default_rng(shuffle_seq)
        velocity = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]

        history = {"loss": [], "accuracy": []}
        lr, mu = self.cfg.learning_rate, self.cfg.momentum
        for epoch in tqdm(range(self.cfg.epochs), desc="Entraînement", disable=None, leave=False):
            perm = shuffle_rng.permutation(len(data))
            for start in range(0, len(data), self.cfg.batch_size):
                idx = perm[start:start + self.cfg.batch_size]
                _, grads = loss_and_gradients(net, data.X[idx], data.y[idx])
                for layer, (vw, vb), (gw, gb) in zip(net.layers, velocity, grads):
                    vw *= mu
                    vw -= lr * gw
                    vb *= mu
                    vb -= lr * gb
                    layer.weights += vw
                    layer.bias += vb
            if not net.all_finite():
                raise ConfigError(f"poids non finis à l'epoch {epoch + 1}, réduire le learning rate")
            history["loss"].append(mean_loss(net, data))
            history["accuracy"].append(accuracy(net, data))
            logger.debug("Epoch %d: loss=%.4f acc=%.4f", epoch + 1,
                         history["loss"][-1], history["accuracy"][-1])

        logger.info("Entraînement terminé: loss=%.4f, accuracy=%.4f",
                    history["loss"][-1], history["accuracy"][-1])
        return net, history


def train_classifier(data: LabeledDataset, arch: Sequence[int], cfg: TrainConfig) -> DenseNetwork:
    net, _ = ClassifierTrainer(cfg).train(data, arch)
    return net


def initial_network(arch: Sequence[int], cfg: TrainConfig) -> DenseNetwork:
    """Réseau d'initialisation exactement utilisé par `train_classifier` pour cette graine"""
    init_seq, _ = np.random.SeedSequence(cfg.seed).spawn(2)
    return build_network(arch, cfg.seed, rng=np.random.default_rng(init_seq))
