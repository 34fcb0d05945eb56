"""
Modèles analytiques binaires (m = 2) à marge et gradient connus.

Ils exposent la même interface "soft" qu'un DenseNetwork (forward_batch,
first_layer_sum_batch) : p = softmax(0, κ·S(x)). L'étiquette dure est
calculée directement à partir du signe de S (1 ssi S > 0), sans passer
par les probabilités arrondies.
"""
import sys
from pathlib import Path
from typing import Protocol

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.models.network import DenseNetwork, softmax
from src.utils.errors import ConfigError, DimensionMismatchError


class SoftClassifier(Protocol):
    input_dim: int
    output_dim: int

    def forward_batch(self, X: np.ndarray) -> np.ndarray: ...

    def first_layer_sum_batch(self, X: np.ndarray) -> np.ndarray: ...


class AnalyticModel:
    """Base commune : classe 1 ssi S(x) > 0"""
    output_dim = 2
    # Constante de Lipschitz du gradient de S
    lipschitz = 0.0

    def __init__(self, dim: int, kappa: float = 1.0, bounded: bool = False):
        if dim < 1:
            raise ConfigError("dimension >= 1 requise")
        self.input_dim = int(dim)
        self.kappa = float(kappa)
        self.bounded = bounded

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise DimensionMismatchError(self.input_dim, X.shape[1])
        return X

    def margin_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def margin(self, x: np.ndarray) -> float:
        return float(self.margin_batch(x)[0])

    def label_batch(self, X: np.ndarray) -> np.ndarray:
        return (self.margin_batch(X) > 0.0).astype(np.int64)

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        s = self.margin_batch(X)
        logits = np.stack([np.zeros_like(s), self.kappa * s], axis=1)
        return softmax(logits)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_batch(x)[0]

    def first_layer_sum_batch(self, X: np.ndarray) -> np.ndarray:
        return self.margin_batch(X)

    def first_layer_sum(self, x: np.ndarray) -> float:
        return self.margin(x)


class LinearModel(AnalyticModel):
    """S(x) = w·x + b"""

    def __init__(self, w, b: float, kappa: float = 1.0, bounded: bool = False):
        self.w = np.asarray(w, dtype=np.float64).reshape(-1)
        self.b = float(b)
        super().__init__(self.w.shape[0], kappa, bounded)

    def margin_batch(self, X):
        return self._check(X) @ self.w + self.b

    def gradient(self, x):
        self._check(x)
        return self.w.copy()

    def l2_distance_to_boundary(self, x) -> float:
        return abs(self.margin(x)) / float(np.linalg.norm(self.w))

    def linf_distance_to_boundary(self, x) -> float:
        return abs(self.margin(x)) / float(np.sum(np.abs(self.w)))

    def project(self, x) -> np.ndarray:
        """Projection orthogonale sur l'hyperplan S = 0"""
        x = np.asarray(x, dtype=np.float64)
        return x - self.margin(x) / float(self.w @ self.w) * self.w


class QuadraticModel(AnalyticModel):
    """S(x) = r² - ‖x - c‖² (classe 1 à l'intérieur de la boule)"""
    lipschitz = 2.0

    def __init__(self, center, radius: float, kappa: float = 1.0, bounded: bool = False):
        self.center = np.asarray(center, dtype=np.float64).reshape(-1)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ConfigError("rayon strictement positif requis")
        super().__init__(self.center.shape[0], kappa, bounded)

    def margin_batch(self, X):
        diff = self._check(X) - self.center
        return self.radius ** 2 - np.sum(diff * diff, axis=1)

    def gradient(self, x):
        x = self._check(x)[0]
        return -2.0 * (x - self.center)

    def boundary_point(self, direction) -> np.ndarray:
        """Point exact de la sphère S = 0 dans la direction donnée"""
        direction = np.asarray(direction, dtype=np.float64)
        return self.center + self.radius * direction / np.linalg.norm(direction)


def hard_labels(model, X: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Étiquette non défendue : signe de S pour un modèle analytique, argmax sinon"""
    if isinstance(model, AnalyticModel):
        return model.label_batch(X)
    return np.argmax(P, axis=1)


def is_bounded(model) -> bool:
    """Les entrées des réseaux vivent dans [0,1]^d"""
    if isinstance(model, AnalyticModel):
        return model.bounded
    return isinstance(model, DenseNetwork) or getattr(model, "bounded", True)
