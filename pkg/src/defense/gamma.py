"""
Recherche du seuil γ par dichotomie : plus petit γ (à 0.01 près) dont la
perte d'accuracy reste sous le plafond, et balayage du compromis γ.
"""
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import DEFENSE_CONFIG
from src.data.preprocessing import LabeledDataset
from src.defense.predcoin import DefenseState, FlipMode, detect_batch
from src.evaluation.metrics import accuracy_loss
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

Evaluator = Callable[[float], float]


@dataclass
class GammaSearchResult:
    gamma: float
    iterations: int
    feasible: bool
    bracket: Tuple[float, float]
    history: List[Tuple[float, float]] = field(default_factory=list)


def default_evaluator(ds: DefenseState, data: LabeledDataset, eval_seed: int) -> Evaluator:
    """Δacc(γ) en mode probabilistic, graine d'évaluation fixe"""
    probabilistic = ds.with_mode(FlipMode.PROBABILISTIC)

    def evaluate(gamma: float) -> float:
        return accuracy_loss(ds.target, probabilistic.with_gamma(gamma), data, eval_seed).delta
    return evaluate


def gamma_search(ds: Optional[DefenseState], validation_data: Optional[LabeledDataset],
                 acc_loss_cap: float = DEFENSE_CONFIG["acc_loss_cap"],
                 tol: float = DEFENSE_CONFIG["gamma_tol"],
                 eval_seed: int = DEFENSE_CONFIG["eval_seed"],
                 evaluator: Optional[Evaluator] = None) -> GammaSearchResult:
    """
    Dichotomie sur [0,1] tant que |γ_high − γ_low| >= tol.

    Si Δacc(γ) <= plafond, γ_high ← γ, sinon γ_low ← γ ; on renvoie γ_high.
    Sans γ admissible (même γ = 1), renvoie 1 avec feasible=False.
    """
    if not 0.0 < acc_loss_cap <= 1.0:
        raise ConfigError(f"plafond de perte d'accuracy invalide: {acc_loss_cap}")
    if evaluator is None:
        evaluator = default_evaluator(ds, validation_data, eval_seed)

    history = []
    top = evaluator(1.0)
    history.append((1.0, top))
    if top > acc_loss_cap:
        logger.warning("Aucun gamma ne respecte le plafond %.3f (Δacc(1)=%.4f)", acc_loss_cap, top)
        return GammaSearchResult(1.0, 0, False, (1.0, 1.0), history)

    lo, hi, iterations = 0.0, 1.0, 0
    while abs(hi - lo) >= tol:
        mid = 0.5 * (lo + hi)
        loss = evaluator(mid)
        history.append((mid, loss))
        if loss <= acc_loss_cap:
            hi = mid
        else:
            lo = mid
        iterations += 1
    logger.info("gamma retenu: %.4f après %d itérations", hi, iterations)
    return GammaSearchResult(hi, iterations, True, (lo, hi), history)


def gamma_sweep(ds: DefenseState, data: LabeledDataset, gammas: Sequence[float],
                eval_seed: int = DEFENSE_CONFIG["eval_seed"]) -> pd.DataFrame:
    """Compromis γ : perte d'accuracy et taux de signalement sur données propres"""
    P = ds.target.forward_batch(data.X)
    rows = []
    for gamma in gammas:
        state = ds.with_mode(FlipMode.PROBABILISTIC).with_gamma(float(gamma))
        loss = accuracy_loss(ds.target, state, data, eval_seed)
        flagged, _ = detect_batch(state, P)
        rows.append({
            "gamma": float(gamma),
            "acc_loss": loss.delta,
            "acc_loss_se": loss.se,
            "flag_rate": float(np.mean(flagged)),
        })
    return pd.DataFrame(rows, columns=["gamma", "acc_loss", "acc_loss_se", "flag_rate"])
