import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.utils.errors import ConfigError, EmptyDatasetError, LabelRangeError

logger = logging.getLogger(__name__)


@dataclass
class LabeledDataset:
    """Entrées X (n, d) dans [0,1]^d en float64, étiquettes y (n,) entières"""
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ConfigError(
                f"X {self.X.shape} et y {self.y.shape} incompatibles"
            )

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx])

    def head(self, n: int) -> "LabeledDataset":
        return LabeledDataset(self.X[:n], self.y[:n])

    def check(self, n_classes: Optional[int] = None) -> None:
        """Vérifie que le jeu est non vide et que les étiquettes sont dans [0, m)"""
        if len(self) == 0:
            raise EmptyDatasetError("jeu de données vide")
        if n_classes is not None and (self.y.min() < 0 or self.y.max() >= n_classes):
            raise LabelRangeError(
                f"étiquettes hors de [0, {n_classes}): min={self.y.min()}, max={self.y.max()}"
            )

    def split(self, fraction: float, seed: int) -> Tuple["LabeledDataset", "LabeledDataset"]:
        """Découpage aléatoire (graine fixe) : (1 - fraction) / fraction"""
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(self))
        n_held = int(round(len(self) * fraction))
        return self.subset(perm[n_held:]), self.subset(perm[:n_held])


def make_blobs(n_per_class: int = 200, dim: int = 2, separation: float = 6.0,
               sigma: float = 0.05, seed: int = 0) -> LabeledDataset:
    """
    Deux gaussiennes isotropes dans [0,1]^d.

    Les centres sont à 0.5 ± separation·sigma/2 le long d'une direction
    unitaire aléatoire ; les points sont ensuite ramenés dans le cube.
    """
    if n_per_class < 1:
        raise EmptyDatasetError("n_per_class doit être >= 1")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    offset = 0.5 * separation * sigma * direction
    centers = [0.5 - offset, 0.5 + offset]
    X = np.concatenate([
        c + sigma * rng.standard_normal((n_per_class, dim)) for c in centers
    ])
    y = np.repeat(np.arange(2), n_per_class)
    perm = rng.permutation(len(y))
    return LabeledDataset(np.clip(X[perm], 0.0, 1.0), y[perm])


def correctly_classified(net, data: LabeledDataset) -> LabeledDataset:
    """Garde uniquement les entrées bien classées par le réseau"""
    keep = net.predict_labels(data.X) == data.y
    logger.info("Entrées bien classées: %d/%d", int(keep.sum()), len(data))
    return data.subset(np.flatnonzero(keep))
