import logging
import math
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.primitives import (
    AttackConfig, AttackResult, GradientEstimate, QueryTracker, bisect_to_boundary,
    estimate_gradient, finalize, lp_distance, random_adversarial_init,
)
from src.utils.errors import BudgetExhaustedError

logger = logging.getLogger(__name__)

GradientEstimator = Callable[..., GradientEstimate]


def geometric_progression(oracle, x_star, c_star, x_t, direction, step, tracker,
                          max_halvings: int) -> Optional[np.ndarray]:
    """Divise le pas par deux jusqu'à retomber du côté adversarial"""
    for _ in range(max_halvings + 1):
        if not tracker.can(1):
            return None
        candidate = oracle.clip(x_t + step * direction)
        if oracle.phi(x_star, c_star, candidate) == 1:
            return candidate
        step /= 2.0
    return None


def hsja(oracle, x_star: np.ndarray, c_star: int, cfg: AttackConfig,
         gradient_estimator: Optional[GradientEstimator] = None) -> AttackResult:
    """
    HopSkipJump : dichotomie vers la frontière, estimation du gradient,
    pas géométrique, puis nouvelle dichotomie.

    `gradient_estimator` remplace `estimate_gradient` (attaques adaptatives) ;
    il reçoit (oracle, x_star, c_star, x_t, delta, B, rng, tracker).
    """
    estimator = gradient_estimator or estimate_gradient
    x_star = np.asarray(x_star, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    tracker = QueryTracker(oracle, cfg.query_budget)
    dim = x_star.shape[0]
    tol = cfg.tolerance(dim)
    bisect_cost = math.ceil(math.log2(1.0 / tol))

    x0 = random_adversarial_init(oracle, x_star, c_star, cfg.norm, cfg, rng, tracker)
    if x0 is None:
        return finalize(oracle, x_star, c_star, None, tracker, [], "hsja", cfg.norm)

    x_t = bisect_to_boundary(oracle, x_star, c_star, x0, tol, cfg.norm, tracker, verify=False)
    best_dist = lp_distance(x_t, x_star, cfg.norm)
    trace = [(tracker.used, best_dist)]

    t = 0
    degenerate = 0
    while True:
        t += 1
        B = min(cfg.B0 * math.ceil(math.sqrt(t)), cfg.B_max)
        B = min(B, tracker.spendable - bisect_cost - 1)
        if B < 1:
            break
        delta = float(np.linalg.norm(x_t - x_star)) / dim
        try:
            est = estimator(oracle, x_star, c_star, x_t, delta, B, rng, tracker)
        except BudgetExhaustedError:
            break
        if est.is_zero:
            # estimation dégénérée sans requête (aucune direction exploitable)
            degenerate = degenerate + 1 if est.queries == 0 else 0
            if degenerate >= 10:
                break
            continue
        degenerate = 0
        direction = est.direction if cfg.norm == "l2" else np.sign(est.direction)

        step = best_dist / math.sqrt(t)
        x_new = geometric_progression(oracle, x_star, c_star, x_t, direction, step,
                                      tracker, cfg.max_halvings)
        if x_new is None:
            continue
        x_new = bisect_to_boundary(oracle, x_star, c_star, x_new, tol, cfg.norm,
                                   tracker, verify=False)
        new_dist = lp_distance(x_new, x_star, cfg.norm)
        if new_dist <= best_dist:
            x_t, best_dist = x_new, new_dist
            trace.append((tracker.used, best_dist))
        logger.debug("HSJA t=%d B=%d dist=%.5f queries=%d", t, B, best_dist, tracker.used)

    return finalize(oracle, x_star, c_star, x_t, tracker, trace, "hsja", cfg.norm)
