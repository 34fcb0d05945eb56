"""
Oracle "hard-label" : ne renvoie que l'indice de classe et compte les requêtes.
"""
import sys
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.defense.predcoin import DefenseState, FlipMode, defended_predict_batch
from src.oracle.models import AnalyticModel, hard_labels, is_bounded
from src.utils.errors import DimensionMismatchError, UnsupportedOperationError


class HardLabelOracle:
    """
    Interface boîte noire C(x).

    Le compteur `query_count` augmente d'exactement 1 par étiquette demandée.
    Avec une défense, `flag_count` compte les requêtes signalées par F_Q.
    """

    def __init__(self, target=None, defense: Optional[DefenseState] = None,
                 rng: Optional[np.random.Generator] = None):
        if target is None and defense is None:
            raise UnsupportedOperationError("un oracle a besoin d'une cible ou d'une défense")
        self.defense = defense
        self.target = defense.target if defense is not None else target
        self.rng = rng if rng is not None else np.random.default_rng(
            defense.seed if defense is not None else 0
        )
        self.query_count = 0
        self.flag_count = 0

    @property
    def dim(self) -> int:
        return self.target.input_dim

    @property
    def bounded(self) -> bool:
        return is_bounded(self.target)

    @property
    def is_analytic(self) -> bool:
        return isinstance(self.target, AnalyticModel)

    @property
    def defended(self) -> bool:
        return self.defense is not None and self.defense.mode is not FlipMode.OFF

    def clip(self, X: np.ndarray) -> np.ndarray:
        """Ramène les points dans [0,1]^d si le domaine de la cible est borné"""
        X = np.asarray(X, dtype=np.float64)
        return np.clip(X, 0.0, 1.0) if self.bounded else X

    def query_labels(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionMismatchError(self.dim, X.shape[1])
        if self.defense is not None:
            labels, flagged = defended_predict_batch(self.defense, X, self.rng)
            self.flag_count += int(flagged.sum())
        else:
            labels = hard_labels(self.target, X, self.target.forward_batch(X))
        self.query_count += X.shape[0]
        return labels

    def query_label(self, x: np.ndarray) -> int:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatchError(self.dim, x.shape[-1] if x.ndim else 0)
        return int(self.query_labels(x[None, :])[0])

    def phi_batch(self, c_star: int, X: np.ndarray) -> np.ndarray:
        """+1 si l'étiquette diffère de c_star, -1 sinon (S = 0 donne -1)"""
        return np.where(self.query_labels(X) != c_star, 1, -1).astype(np.int64)

    def phi(self, x_star: np.ndarray, c_star: int, x_t: np.ndarray) -> int:
        x_t = np.asarray(x_t, dtype=np.float64)
        return int(self.phi_batch(c_star, x_t[None, :])[0])

    def analytic_margin_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        """Marge S(x) et gradient exact (oracles analytiques uniquement)"""
        if not self.is_analytic:
            raise UnsupportedOperationError("marge analytique indisponible pour un oracle à modèle")
        return self.target.margin(x), self.target.gradient(x)
