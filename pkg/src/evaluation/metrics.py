"""
Métriques d'évaluation : distance ℓp médiane, taux de succès (ASR),
perte d'accuracy due à la défense et surcoût de temps d'inférence.
"""
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.primitives import AttackResult
from src.data.preprocessing import LabeledDataset
from src.defense.predcoin import DefenseState, defended_predict_batch
from src.oracle.models import hard_labels
from src.utils.errors import ConfigError, EmptyDatasetError


def median_lp(results: Sequence[AttackResult], p: str) -> float:
    """Médiane des distances des attaques réussies (moyenne des deux centrales si pair)"""
    distances = [r.distance(p) for r in results if r.success]
    if not distances:
        raise EmptyDatasetError("aucune attaque réussie")
    return float(np.median(distances))


def asr(results: Sequence[AttackResult], epsilon: float, p: str) -> float:
    """Fraction des échantillons attaqués avec succès à une distance <= epsilon"""
    if not results:
        raise EmptyDatasetError("aucun résultat d'attaque")
    if epsilon < 0:
        raise ConfigError("epsilon doit être positif")
    hits = sum(1 for r in results if r.success and r.distance(p) <= epsilon)
    return hits / len(results)


def asr_curve(results: Sequence[AttackResult], epsilons: Sequence[float], p: str) -> np.ndarray:
    return np.array([asr(results, eps, p) for eps in epsilons])


@dataclass
class AccuracyLoss:
    delta: float
    se: float
    acc_base: float
    acc_defended: float


def accuracy_loss(target, defense: DefenseState, test_data: LabeledDataset,
                  eval_seed: int) -> AccuracyLoss:
    """
    Δacc = acc(non défendu) − acc(défendu), tirages de la défense sous eval_seed.

    L'erreur standard est celle de la différence appariée par exemple.
    """
    if len(test_data) == 0:
        raise EmptyDatasetError("jeu de test vide")
    P = target.forward_batch(test_data.X)
    base_correct = hard_labels(target, test_data.X, P) == test_data.y
    defended, _ = defended_predict_batch(defense, test_data.X, np.random.default_rng(eval_seed))
    defended_correct = defended == test_data.y

    diff = base_correct.astype(np.float64) - defended_correct.astype(np.float64)
    n = diff.shape[0]
    se = float(np.std(diff, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return AccuracyLoss(
        delta=float(base_correct.mean() - defended_correct.mean()),
        se=se,
        acc_base=float(base_correct.mean()),
        acc_defended=float(defended_correct.mean()),
    )


def inference_time_ratio(target, defense: DefenseState, batch: np.ndarray, reps: int = 5) -> float:
    """Temps défendu / temps non défendu (médiane sur `reps` répétitions, horloge monotone)"""
    if reps < 5:
        raise ConfigError("au moins 5 répétitions")
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    rng = np.random.default_rng(0)

    def undefended():
        hard_labels(target, batch, target.forward_batch(batch))

    def defended():
        defended_predict_batch(defense, batch, rng)

    def median_time(fn):
        timings = []
        for _ in range(reps):
            start = time.perf_counter()
            fn()
            timings.append(time.perf_counter() - start)
        return float(np.median(timings))

    # passe à vide pour les caches
    undefended()
    defended()
    return median_time(defended) / median_time(undefended)
