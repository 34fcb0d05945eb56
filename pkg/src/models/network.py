"""
Réseau dense minimal (numpy, float64).

Sert à la fois pour le classifieur cible C et pour le détecteur F_Q.
Un réseau entraîné est immuable : les passes avant concurrentes sont sûres.
"""
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.utils.errors import ConfigError, DimensionMismatchError


class Activation(str, Enum):
    RELU = "relu"
    SOFTMAX = "softmax"
    IDENTITY = "identity"


# Tags binaires du format PCNN
ACTIVATION_TAGS = {Activation.RELU: 0, Activation.SOFTMAX: 1, Activation.IDENTITY: 2}
TAG_ACTIVATIONS = {tag: act for act, tag in ACTIVATION_TAGS.items()}


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax stable sur le dernier axe"""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _apply(activation: Activation, z: np.ndarray) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    if activation is Activation.SOFTMAX:
        return softmax(z)
    return z


@dataclass
class DenseLayer:
    """Couche dense : weights (rows=sorties, cols=entrées), bias (rows,)"""
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        self.activation = Activation(self.activation)
        if self.weights.ndim != 2 or self.bias.shape[0] != self.weights.shape[0]:
            raise ConfigError(
                f"couche incohérente: weights {self.weights.shape}, bias {self.bias.shape}"
            )

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights.shape[0]


class DenseNetwork:
    """Pile de couches denses terminée par un softmax"""

    def __init__(self, layers: Sequence[DenseLayer]):
        if not layers:
            raise ConfigError("un réseau doit contenir au moins une couche")
        for prev, nxt in zip(layers[:-1], layers[1:]):
            if nxt.input_dim != prev.output_dim:
                raise ConfigError(
                    f"couches incompatibles: {prev.output_dim} sorties vers {nxt.input_dim} entrées"
                )
        if layers[-1].activation is not Activation.SOFTMAX:
            raise ConfigError("la dernière couche doit être un softmax")
        self.layers: List[DenseLayer] = list(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def arch(self) -> List[int]:
        return [self.input_dim] + [layer.output_dim for layer in self.layers]

    def _check_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            actual = X.shape[-1] if X.ndim >= 1 else 0
            raise DimensionMismatchError(self.input_dim, actual)
        return X

    def forward_layers(self, X: np.ndarray) -> List[np.ndarray]:
        """Activations de chaque couche, entrée comprise (utile à la rétropropagation)"""
        h = self._check_batch(X)
        outputs = [h]
        for layer in self.layers:
            h = _apply(layer.activation, h @ layer.weights.T + layer.bias)
            outputs.append(h)
        return outputs

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        return self.forward_layers(X)[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Vecteur de probabilités pour une seule entrée"""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatchError(self.input_dim, x.shape[-1] if x.ndim else 0)
        return self.forward_batch(x[None, :])[0]

    def first_layer_sum_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_batch(X)
        first = self.layers[0]
        return np.sum(_apply(first.activation, X @ first.weights.T + first.bias), axis=1)

    def first_layer_sum(self, x: np.ndarray) -> float:
        """Somme des sorties post-activation de la première couche"""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatchError(self.input_dim, x.shape[-1] if x.ndim else 0)
        return float(self.first_layer_sum_batch(x[None, :])[0])

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        # np.argmax renvoie le premier indice en cas d'égalité
        return np.argmax(self.forward_batch(X), axis=1)

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([
            DenseLayer(layer.weights.copy(), layer.bias.copy(), layer.activation)
            for layer in self.layers
        ])

    def all_finite(self) -> bool:
        return all(
            np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))
            for layer in self.layers
        )

    def __repr__(self):
        acts = ",".join(layer.activation.value for layer in self.layers)
        return f"<DenseNetwork(arch={self.arch}, activations={acts})>"


def build_network(arch: Sequence[int], seed: int,
                  hidden_activation: Activation = Activation.RELU,
                  rng: Optional[np.random.Generator] = None) -> DenseNetwork:
    """
    Construit un réseau initialisé (Glorot uniforme, biais nuls).

    Args:
        arch: tailles des couches, entrée comprise, ex. [784, 128, 64, 10]
        seed: graine de l'initialisation
        hidden_activation: activation des couches cachées

    Returns:
        DenseNetwork: couches cachées en ReLU, sortie en softmax
    """
    if len(arch) < 2 or any(int(n) < 1 for n in arch):
        raise ConfigError(f"architecture invalide: {list(arch)}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(arch[:-1], arch[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        is_last = i == len(arch) - 2
        activation = Activation.SOFTMAX if is_last else Activation(hidden_activation)
        layers.append(DenseLayer(weights, np.zeros(fan_out), activation))
    return DenseNetwork(layers)
