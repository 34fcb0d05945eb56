import logging
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.primitives import (
    AttackConfig, AttackResult, QueryTracker, bisect_to_boundary, finalize,
    lp_distance, random_adversarial_init,
)

logger = logging.getLogger(__name__)


def _adapt(step: float, successes: list, window: int, target: float) -> float:
    """Ajuste un pas sur une fenêtre d'essais (×1.5 au-dessus de la cible, ×0.67 en dessous)"""
    if len(successes) < window:
        return step
    rate = float(np.mean(successes[-window:]))
    successes.clear()
    if rate > target:
        return step * 1.5
    if rate < target:
        return step * 0.67
    return step


def boundary_attack(oracle, x_star: np.ndarray, c_star: int, cfg: AttackConfig) -> AttackResult:
    """
    Boundary Attack : pas orthogonal sur la sphère centrée en x_star puis
    contraction vers x_star ; un candidat n'est accepté que s'il reste
    adversarial et ne s'éloigne pas de x_star.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    tracker = QueryTracker(oracle, cfg.query_budget)
    dim = x_star.shape[0]

    x0 = random_adversarial_init(oracle, x_star, c_star, "l2", cfg, rng, tracker)
    if x0 is None:
        return finalize(oracle, x_star, c_star, None, tracker, [], "ba", cfg.norm)
    x = bisect_to_boundary(oracle, x_star, c_star, x0, cfg.tolerance(dim), "l2",
                           tracker, verify=False)
    dist = lp_distance(x, x_star, "l2")
    trace = [(tracker.used, dist)]

    spherical_step, source_step = cfg.ba_spherical_step, cfg.ba_source_step
    spherical_hits, source_hits = [], []
    while tracker.can(2) and dist > 0.0:
        offset = x - x_star
        eta = rng.standard_normal(dim)
        eta -= (eta @ offset) / (offset @ offset) * offset
        eta *= spherical_step * dist / max(np.linalg.norm(eta), 1e-300)
        on_sphere = offset + eta
        on_sphere *= dist / np.linalg.norm(on_sphere)
        candidate = oracle.clip(x_star + on_sphere)

        spherical_ok = oracle.phi(x_star, c_star, candidate) == 1
        spherical_hits.append(spherical_ok)
        if spherical_ok:
            contracted = oracle.clip(candidate - source_step * (candidate - x_star))
            source_ok = oracle.phi(x_star, c_star, contracted) == 1
            source_hits.append(source_ok)
            new_dist = lp_distance(contracted, x_star, "l2")
            if source_ok and new_dist <= dist:
                x, dist = contracted, new_dist
                trace.append((tracker.used, dist))

        spherical_step = _adapt(spherical_step, spherical_hits, cfg.ba_window, 0.5)
        source_step = min(_adapt(source_step, source_hits, cfg.ba_window, 0.25), 0.5)

    logger.debug("BA terminé: dist=%.5f, queries=%d", dist, tracker.used)
    return finalize(oracle, x_star, c_star, x, tracker, trace, "ba", cfg.norm)
