"""
Attaque "uncertainty-aware" : chaque point est interrogé k fois à l'identique
et les réponses sont agrégées avant d'entrer dans l'attaque.

Deux règles de vote :
- majority : signe de la somme, égalité → -1
- consensus : la réponse commune si les k réponses concordent, 0 (abstention) sinon
"""
import logging
import sys
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import ADAPTIVE_CONFIG
from src.attacks.primitives import estimate_gradient
from src.theory.verification import adversarial_normal, cos_angle
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

VoteRule = Literal["majority", "consensus"]
VOTE_RULES = ("majority", "consensus")


def _check(k: int, rule: str):
    if k < 1:
        raise ConfigError(f"k doit être >= 1: {k}")
    if rule not in VOTE_RULES:
        raise ConfigError(f"règle de vote inconnue: {rule}")


def _vote(answers: np.ndarray, rule: str) -> np.ndarray:
    """answers : (n, k) à valeurs ±1"""
    if rule == "consensus":
        agree = np.all(answers == answers[:, :1], axis=1)
        return np.where(agree, answers[:, 0], 0).astype(np.int64)
    return np.where(answers.sum(axis=1) > 0, 1, -1).astype(np.int64)


def uncertainty_phi_batch(oracle, c_star: int, X: np.ndarray, k: int,
                          rule: VoteRule = "majority") -> np.ndarray:
    """φ agrégé pour chaque ligne de X ; consomme exactement k requêtes par point"""
    _check(k, rule)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    answers = oracle.phi_batch(c_star, np.repeat(X, k, axis=0)).reshape(X.shape[0], k)
    return _vote(answers, rule)


def uncertainty_phi(oracle, x_star: np.ndarray, c_star: int, x_q: np.ndarray, k: int,
                    rule: VoteRule = "majority") -> int:
    x_q = np.asarray(x_q, dtype=np.float64)
    return int(uncertainty_phi_batch(oracle, c_star, x_q[None, :], k, rule)[0])


class UncertaintyAwareOracle:
    """
    Enveloppe d'un oracle (défendu) : chaque φ coûte k requêtes répétées.

    Toutes les attaques peuvent l'utiliser telles quelles ; `query_cost`
    indique au suivi de budget le prix d'un point.
    """

    def __init__(self, base, k: int = ADAPTIVE_CONFIG["k"],
                 rule: VoteRule = ADAPTIVE_CONFIG["vote"]):
        _check(k, rule)
        self.base = base
        self.k = int(k)
        self.rule = rule

    @property
    def query_cost(self) -> int:
        return self.k

    @property
    def query_count(self) -> int:
        return self.base.query_count

    @property
    def flag_count(self) -> int:
        return self.base.flag_count

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def bounded(self) -> bool:
        return self.base.bounded

    @property
    def is_analytic(self) -> bool:
        return self.base.is_analytic

    def clip(self, X: np.ndarray) -> np.ndarray:
        return self.base.clip(X)

    def query_labels(self, X: np.ndarray) -> np.ndarray:
        """Étiquette la plus fréquente sur k répétitions (égalité → plus petit indice)"""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        labels = self.base.query_labels(np.repeat(X, self.k, axis=0)).reshape(X.shape[0], self.k)
        return np.array([np.bincount(row).argmax() for row in labels], dtype=np.int64)

    def phi_batch(self, c_star: int, X: np.ndarray) -> np.ndarray:
        return uncertainty_phi_batch(self.base, c_star, X, self.k, self.rule)

    def phi(self, x_star: np.ndarray, c_star: int, x_t: np.ndarray) -> int:
        return uncertainty_phi(self.base, x_star, c_star, x_t, self.k, self.rule)

    def analytic_margin_gradient(self, x: np.ndarray):
        return self.base.analytic_margin_gradient(x)


def uncertainty_k_sweep(oracle, x_star: np.ndarray, c_star: int, x_t: np.ndarray,
                        ks: Sequence[int], B: int, delta: float, rng: np.random.Generator,
                        rule: VoteRule = "majority",
                        reference: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    Cosinus entre l'estimation à k répétitions et la vraie normale, pour chaque k.

    Mêmes directions pour tous les k. `reference` vaut par défaut le gradient
    analytique de la marge orienté vers le côté adversarial.
    """
    if reference is None:
        reference = adversarial_normal(oracle, x_t, c_star)
    seed = int(rng.integers(2**63))
    rows = []
    for k in ks:
        wrapped = UncertaintyAwareOracle(oracle, k, rule)
        before = oracle.query_count
        est = estimate_gradient(wrapped, x_star, c_star, x_t, delta, B,
                                np.random.default_rng(seed))
        cos = 0.0 if est.is_zero else cos_angle(est.direction, reference)
        rows.append({"k": int(k), "cos": cos, "queries": oracle.query_count - before,
                     "n_used": est.n_used})
        logger.debug("k=%d cos=%.4f", k, cos)
    return pd.DataFrame(rows, columns=["k", "cos", "queries", "n_used"])
