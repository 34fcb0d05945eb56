"""
Attaque par contournement du détecteur (boîte blanche sur la cible et F_Q).

Pour chaque direction u, on cherche le plus petit δ tel que x_t + δ·u
ne soit pas signalé (y1 < γ) et reste dans [0,1]^d : balayage de 50
valeurs log-espacées dans (0, delta_max], puis 20 pas de dichotomie
autour du premier point admissible.
"""
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import ADAPTIVE_CONFIG
from src.attacks.primitives import GradientEstimate, QueryTracker, sample_unit_sphere
from src.defense.predcoin import DefenseState, detect_batch
from src.oracle.models import is_bounded
from src.utils.errors import BudgetExhaustedError, ConfigError

logger = logging.getLogger(__name__)

N_GRID = ADAPTIVE_CONFIG["bypass_grid"]
N_REFINE = ADAPTIVE_CONFIG["bypass_refine"]
# taille max d'un lot de points évalués en une passe
_CHUNK_FLOATS = 2_000_000


@dataclass
class BypassResult:
    delta_b: Optional[float]
    queries_to_detector: int
    feasible: bool


@dataclass
class BypassEstimate(GradientEstimate):
    feasible_fraction: float = 0.0
    detector_evals: int = 0


def _admissible(ds: DefenseState, X: np.ndarray, bounded: bool) -> np.ndarray:
    flagged, _ = detect_batch(ds, ds.target.forward_batch(X))
    ok = ~flagged
    if bounded:
        ok &= np.all((X >= 0.0) & (X <= 1.0), axis=1)
    return ok


def bypass_deltas(ds: DefenseState, x_t: np.ndarray, U: np.ndarray, delta_max: float,
                  bounded: Optional[bool] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    δ_b minimal pour chaque ligne de U (NaN si aucune valeur admissible).

    Returns:
        (deltas, evaluations) ; evaluations = appels au détecteur par direction
    """
    if delta_max <= 0:
        raise ConfigError(f"delta_max doit être > 0: {delta_max}")
    if bounded is None:
        bounded = is_bounded(ds.target)
    x_t = np.asarray(x_t, dtype=np.float64)
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    m, dim = U.shape
    grid = np.geomspace(delta_max * 1e-3, delta_max, N_GRID)

    chunk = max(1, _CHUNK_FLOATS // (N_GRID * dim))
    feasible = np.empty((m, N_GRID), dtype=bool)
    for start in range(0, m, chunk):
        block = U[start:start + chunk]
        points = x_t[None, None, :] + grid[None, :, None] * block[:, None, :]
        feasible[start:start + chunk] = _admissible(
            ds, points.reshape(-1, dim), bounded
        ).reshape(block.shape[0], N_GRID)

    found = feasible.any(axis=1)
    first = np.argmax(feasible, axis=1)
    deltas = np.full(m, np.nan)
    deltas[found & (first == 0)] = grid[0]
    evaluations = np.full(m, N_GRID, dtype=np.int64)

    refine = np.flatnonzero(found & (first > 0))
    if refine.size:
        # lo non admissible, hi admissible
        lo = grid[first[refine] - 1]
        hi = grid[first[refine]]
        directions = U[refine]
        for _ in range(N_REFINE):
            mid = 0.5 * (lo + hi)
            ok = _admissible(ds, x_t[None, :] + mid[:, None] * directions, bounded)
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        deltas[refine] = hi
        evaluations[refine] += N_REFINE
    return deltas, evaluations


def bypass_delta(ds: DefenseState, x_t: np.ndarray, u: np.ndarray, delta_max: float,
                 bounded: Optional[bool] = None) -> BypassResult:
    """Plus petit δ <= delta_max qui échappe au détecteur dans la direction u"""
    deltas, evaluations = bypass_deltas(ds, x_t, np.asarray(u)[None, :], delta_max, bounded)
    delta = float(deltas[0])
    feasible = not np.isnan(delta)
    return BypassResult(delta if feasible else None, int(evaluations[0]), feasible)


def bypass_gradient_estimate(ds: DefenseState, oracle, x_star: np.ndarray, c_star: int,
                             x_t: np.ndarray, B: int, delta_max: float,
                             rng: np.random.Generator,
                             tracker: Optional[QueryTracker] = None) -> BypassEstimate:
    """
    Estimation du gradient limitée aux directions qui contournent F_Q.

    On tire B directions (mêmes tirages qu'`estimate_gradient` à graine égale),
    on n'interroge l'oracle défendu qu'en x_t + δ_b·u pour les directions
    admissibles et on moyenne φ·u sur celles-ci.
    """
    if B < 1:
        raise ConfigError("B doit être >= 1")
    x_t = np.asarray(x_t, dtype=np.float64)
    u = sample_unit_sphere(rng, B, x_t.shape[0])
    deltas, evaluations = bypass_deltas(ds, x_t, u, delta_max, oracle.bounded)
    keep = np.flatnonzero(~np.isnan(deltas))
    fraction = keep.size / B
    logger.debug("Contournement: %d/%d directions admissibles", keep.size, B)

    if keep.size == 0:
        zero = np.zeros_like(x_t)
        return BypassEstimate(zero, zero, True, 0, 0, 0.0, int(evaluations.sum()))

    affordable = keep.size if tracker is None else min(keep.size, tracker.spendable)
    before = oracle.query_count
    points = oracle.clip(x_t + deltas[keep, None] * u[keep])
    phis = oracle.phi_batch(c_star, points[:affordable])
    if affordable < keep.size:
        partial = (phis[:, None] * u[keep[:affordable]]).sum(axis=0)
        raise BudgetExhaustedError(oracle.query_count - before, partial)

    raw = (phis[:, None] * u[keep]).mean(axis=0)
    norm = np.linalg.norm(raw)
    is_zero = bool(norm == 0.0)
    return BypassEstimate(
        raw=raw,
        direction=raw if is_zero else raw / norm,
        is_zero=is_zero,
        queries=oracle.query_count - before,
        n_used=int(keep.size),
        feasible_fraction=fraction,
        detector_evals=int(evaluations.sum()),
    )


def make_bypass_estimator(ds: DefenseState,
                          delta_max_ratio: float = ADAPTIVE_CONFIG["bypass_delta_max_ratio"]):
    """
    Estimateur de gradient pour HSJA : delta_max = ratio × ‖x_t − x*‖₂.

    Les fractions admissibles successives sont conservées dans `estimator.fractions`.
    """
    if delta_max_ratio <= 0:
        raise ConfigError("delta_max_ratio doit être > 0")

    def estimator(oracle, x_star, c_star, x_t, delta, B, rng, tracker=None):
        radius = float(np.linalg.norm(np.asarray(x_t) - np.asarray(x_star)))
        delta_max = delta_max_ratio * radius if radius > 0 else delta_max_ratio
        est = bypass_gradient_estimate(ds, oracle, x_star, c_star, x_t, B, delta_max, rng, tracker)
        estimator.fractions.append(est.feasible_fraction)
        return est

    estimator.fractions = []
    return estimator
