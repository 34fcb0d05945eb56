import logging
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.primitives import (
    AttackConfig, AttackResult, QueryTracker, finalize,
)

logger = logging.getLogger(__name__)


def _initial_pattern(oracle, x_star, c_star, cfg, rng, tracker):
    """Motif de signes s et rayon ε tels que x_star + ε·s soit adversarial"""
    dim = x_star.shape[0]
    for i in range(cfg.init_draws):
        if not tracker.can(1):
            break
        eps = cfg.sfa_eps0 + (1.0 - cfg.sfa_eps0) * i / max(cfg.init_draws - 1, 1)
        signs = rng.choice([-1.0, 1.0], size=dim)
        if oracle.phi(x_star, c_star, oracle.clip(x_star + eps * signs)) == 1:
            return signs, eps
    return None, None


def sfa(oracle, x_star: np.ndarray, c_star: int, cfg: AttackConfig) -> AttackResult:
    """
    Attaque évolutionnaire à inversion de signes (orientée ℓ∞).

    Alterne des propositions d'inversion de signe sur un sous-ensemble aléatoire
    de coordonnées (acceptées si φ = +1) et des réductions du rayon ε de 3 %.
    La taille du sous-ensemble double si le taux d'acceptation sur la fenêtre
    est dans [0.5, 1] et est divisée par deux s'il est dans [0, 0.2].
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    tracker = QueryTracker(oracle, cfg.query_budget)
    dim = x_star.shape[0]

    signs, eps = _initial_pattern(oracle, x_star, c_star, cfg, rng, tracker)
    if signs is None:
        return finalize(oracle, x_star, c_star, None, tracker, [], "sfa", cfg.norm)

    x = oracle.clip(x_star + eps * signs)
    trace = [(tracker.used, eps)]
    n_flip = 0 if cfg.sfa_flip_fraction == 0.0 else max(1, math.ceil(cfg.sfa_flip_fraction * dim))
    accepted = []

    while tracker.can(1):
        if n_flip > 0:
            idx = rng.choice(dim, size=min(n_flip, dim), replace=False)
            proposal = signs.copy()
            proposal[idx] *= -1.0
            ok = oracle.phi(x_star, c_star, oracle.clip(x_star + eps * proposal)) == 1
            accepted.append(ok)
            if ok:
                signs = proposal
                x = oracle.clip(x_star + eps * signs)
            if len(accepted) >= cfg.sfa_window:
                rate = float(np.mean(accepted))
                accepted.clear()
                if rate >= 0.5:
                    n_flip = min(2 * n_flip, dim)
                elif rate <= 0.2:
                    n_flip = max(n_flip // 2, 1)
            if not tracker.can(1):
                break

        shrunk = eps * (1.0 - cfg.sfa_shrink)
        candidate = oracle.clip(x_star + shrunk * signs)
        if oracle.phi(x_star, c_star, candidate) == 1:
            eps, x = shrunk, candidate
            trace.append((tracker.used, eps))

    logger.debug("SFA terminé: eps=%.5f, queries=%d", eps, tracker.used)
    return finalize(oracle, x_star, c_star, x, tracker, trace, "sfa", cfg.norm)
