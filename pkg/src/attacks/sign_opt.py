"""
Sign-OPT (ℓ2) : on cherche la direction θ minimisant g(θ), distance de
x_star à la frontière le long de θ. Le gradient de g est estimé par le
signe de g(θ + β·u) − g(θ), obtenu avec une seule requête au rayon g(θ).
"""
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.primitives import (
    AttackConfig, AttackResult, QueryTracker, finalize, sample_unit_sphere,
)
from src.utils.errors import UnsupportedOperationError

logger = logging.getLogger(__name__)

COARSE_START = 0.05


class _Ray:
    """Requêtes le long d'un rayon x_star + λ·θ"""

    def __init__(self, oracle, x_star, c_star, tracker, tol):
        self.oracle = oracle
        self.x_star = x_star
        self.c_star = c_star
        self.tracker = tracker
        self.tol = tol
        self.lambda_max = 2.0 * math.sqrt(x_star.shape[0])

    def point(self, theta, lam):
        return self.oracle.clip(self.x_star + lam * theta)

    def adversarial(self, theta, lam) -> Optional[bool]:
        if not self.tracker.can(1):
            return None
        return self.oracle.phi(self.x_star, self.c_star, self.point(theta, lam)) == 1

    def bisect(self, theta, lo, hi) -> float:
        """Affine [lo, hi] (lo non adversarial, hi adversarial) à une tolérance relative"""
        while hi - lo > self.tol * hi:
            mid = 0.5 * (lo + hi)
            hit = self.adversarial(theta, mid)
            if hit is None:
                break
            if hit:
                hi = mid
            else:
                lo = mid
        return hi

    def coarse(self, theta) -> float:
        """Recherche par doublement à partir de COARSE_START puis dichotomie"""
        lo, lam = 0.0, COARSE_START
        while lam <= self.lambda_max:
            hit = self.adversarial(theta, lam)
            if hit is None:
                return math.inf
            if hit:
                return self.bisect(theta, lo, lam)
            lo, lam = lam, 2.0 * lam
        return math.inf

    def local(self, theta, g_best) -> float:
        """g(θ) si elle bat g_best (rejet immédiat sinon, une requête)"""
        if not math.isfinite(g_best):
            return self.coarse(theta)
        hit = self.adversarial(theta, g_best)
        if not hit:
            return math.inf
        return self.bisect(theta, 0.0, g_best)


def sign_opt(oracle, x_star: np.ndarray, c_star: int, cfg: AttackConfig,
             theta0: Optional[np.ndarray] = None) -> AttackResult:
    if cfg.norm != "l2":
        raise UnsupportedOperationError("Sign-OPT n'est implémenté qu'en ℓ2")
    x_star = np.asarray(x_star, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    tracker = QueryTracker(oracle, cfg.query_budget)
    dim = x_star.shape[0]
    ray = _Ray(oracle, x_star, c_star, tracker, cfg.signopt_tol)

    if theta0 is not None:
        candidates = [np.asarray(theta0, dtype=np.float64) / np.linalg.norm(theta0)]
    else:
        candidates = list(sample_unit_sphere(rng, cfg.signopt_n_init, dim))

    theta, g = None, math.inf
    for cand in candidates:
        if not tracker.can(1):
            break
        g_cand = ray.local(cand, g)
        if g_cand < g:
            theta, g = cand, g_cand
    if theta is None:
        return finalize(oracle, x_star, c_star, None, tracker, [], "signopt", cfg.norm)

    trace = [(tracker.used, g)]
    alpha = cfg.signopt_step
    while tracker.can(cfg.signopt_k + 1) and alpha > 1e-10:
        # Estimation par signes : une requête par direction perturbée, au rayon g
        u = sample_unit_sphere(rng, cfg.signopt_k, dim)
        probes = theta + cfg.signopt_probe * u
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        phis = oracle.phi_batch(c_star, oracle.clip(x_star + g * probes))
        # φ = +1 : g a diminué dans cette direction
        signs = np.where(phis == 1, -1.0, 1.0)
        grad = (signs[:, None] * u).mean(axis=0)

        new_theta = theta - alpha * grad
        new_theta /= np.linalg.norm(new_theta)
        g_new = ray.local(new_theta, g)
        if g_new < g:
            theta, g = new_theta, g_new
            alpha *= 2.0
            trace.append((tracker.used, g))
        else:
            alpha /= 2.0

    logger.debug("Sign-OPT terminé: g=%.5f, queries=%d", g, tracker.used)
    return finalize(oracle, x_star, c_star, ray.point(theta, g), tracker, trace,
                    "signopt", cfg.norm)
