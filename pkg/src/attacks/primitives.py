"""
Briques communes aux attaques hard-label : configuration, suivi du budget,
échantillonnage sur la sphère, estimation Monte-Carlo du gradient,
recherche dichotomique de la frontière et initialisation adversariale.
"""
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import ATTACK_CONFIG
from src.utils.errors import BudgetExhaustedError, ConfigError, NotAdversarialError

logger = logging.getLogger(__name__)


class AttackConfig(BaseModel):
    norm: Literal["l2", "linf"] = ATTACK_CONFIG["norm"]
    query_budget: int = Field(default=ATTACK_CONFIG["query_budget"], ge=0)
    B0: int = Field(default=ATTACK_CONFIG["B0"], ge=1)
    B_max: int = Field(default=ATTACK_CONFIG["B_max"], ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    init_draws: int = Field(default=ATTACK_CONFIG["init_draws"], ge=1)
    # None : min(1e-3, d^-1.5)
    bisect_tol: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    max_halvings: int = Field(default=40, ge=0)

    # Boundary Attack
    ba_spherical_step: float = Field(default=0.01, ge=0.0)
    ba_source_step: float = Field(default=0.01, ge=0.0, lt=1.0)
    ba_window: int = Field(default=30, ge=1)

    # Sign-OPT
    signopt_k: int = Field(default=100, ge=1)
    signopt_n_init: int = Field(default=10, ge=1)
    signopt_probe: float = Field(default=1e-3, gt=0.0)
    signopt_step: float = Field(default=0.2, gt=0.0)
    signopt_tol: float = Field(default=1e-5, gt=0.0)

    # Sign Flip Attack
    sfa_eps0: float = Field(default=0.5, gt=0.0, le=1.0)
    sfa_flip_fraction: float = Field(default=0.05, ge=0.0, le=1.0)
    sfa_shrink: float = Field(default=0.03, ge=0.0, lt=1.0)
    sfa_window: int = Field(default=10, ge=1)

    @classmethod
    def build(cls, **kwargs) -> "AttackConfig":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    def tolerance(self, dim: int) -> float:
        return self.bisect_tol if self.bisect_tol is not None else min(1e-3, dim ** -1.5)


@dataclass
class AttackResult:
    """Résultat d'une attaque (x_adv vaut None si aucune initialisation adversariale)"""
    x_adv: Optional[np.ndarray]
    l2_dist: float
    linf_dist: float
    queries_used: int
    success: bool
    trace: List[Tuple[int, float]] = field(default_factory=list)
    attack: str = ""
    norm: str = "l2"

    def distance(self, p: str) -> float:
        return self.l2_dist if p == "l2" else self.linf_dist


@dataclass
class GradientEstimate:
    """Estimation Monte-Carlo : moyenne brute Σφu/B, direction unitaire, indicateur de nullité"""
    raw: np.ndarray
    direction: np.ndarray
    is_zero: bool
    queries: int
    n_used: int = 0


class QueryTracker:
    """
    Suit le budget d'une attaque sur le compteur de l'oracle.

    Une requête (au coût de l'oracle) est réservée à la confirmation finale.
    """

    def __init__(self, oracle, budget: int):
        self.oracle = oracle
        self.budget = int(budget)
        self.start = oracle.query_count
        self.cost = int(getattr(oracle, "query_cost", 1))

    @property
    def used(self) -> int:
        return self.oracle.query_count - self.start

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    @property
    def spendable(self) -> int:
        """Nombre de points encore interrogeables hors confirmation finale"""
        return max(self.remaining - self.cost, 0) // self.cost

    def can(self, n_points: int = 1) -> bool:
        return self.spendable >= n_points


def lp_distance(a: np.ndarray, b: np.ndarray, norm: str) -> float:
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(diff))) if norm == "linf" else float(np.linalg.norm(diff))


def sample_unit_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Tirages uniformes sur la sphère unité (gaussiennes normalisées)"""
    u = rng.standard_normal((n, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


PhiFn = Callable[[np.ndarray], np.ndarray]


def estimate_gradient(oracle, x_star: np.ndarray, c_star: int, x_t: np.ndarray,
                      delta: float, B: int, rng: np.random.Generator,
                      tracker: Optional[QueryTracker] = None,
                      phi_fn: Optional[PhiFn] = None) -> GradientEstimate:
    """
    Estimation Monte-Carlo de la direction du gradient au point frontière x_t.

    (1/B)·Σ φ(x_t + δ·u_b)·u_b, normalisée ; le vecteur nul est renvoyé tel quel
    avec is_zero=True. Consomme exactement B requêtes (au coût de l'oracle).

    Raises:
        BudgetExhaustedError: budget insuffisant, avec l'estimation partielle
    """
    if B < 1:
        raise ConfigError("B doit être >= 1")
    if phi_fn is None:
        def phi_fn(points):
            return oracle.phi_batch(c_star, points)

    x_t = np.asarray(x_t, dtype=np.float64)
    u = sample_unit_sphere(rng, B, x_t.shape[0])
    affordable = B if tracker is None else min(B, tracker.spendable)
    before = oracle.query_count
    phis = phi_fn(oracle.clip(x_t + delta * u[:affordable]))
    if affordable < B:
        partial = (phis[:, None] * u[:affordable]).sum(axis=0)
        raise BudgetExhaustedError(oracle.query_count - before, partial)

    raw = (phis[:, None] * u).mean(axis=0)
    norm = np.linalg.norm(raw)
    is_zero = bool(norm == 0.0)
    direction = raw if is_zero else raw / norm
    return GradientEstimate(raw, direction, is_zero, oracle.query_count - before,
                            int(np.count_nonzero(phis)))


def _interpolate(x_star: np.ndarray, x_adv: np.ndarray, alpha: float, norm: str) -> np.ndarray:
    if norm == "linf":
        radius = alpha * np.max(np.abs(x_adv - x_star))
        return np.clip(x_adv, x_star - radius, x_star + radius)
    return (1.0 - alpha) * x_star + alpha * x_adv


def bisect_to_boundary(oracle, x_star: np.ndarray, c_star: int, x_adv: np.ndarray,
                       tol: float, norm: str = "l2",
                       tracker: Optional[QueryTracker] = None,
                       verify: bool = True) -> np.ndarray:
    """
    Dichotomie entre x_star (α=0) et x_adv (α=1) jusqu'à un intervalle <= tol.

    En ℓ∞ l'interpolation est la projection de x_adv sur la boule ℓ∞ de rayon
    α·‖x_adv − x_star‖∞. Le point renvoyé est toujours du côté adversarial.
    Requêtes : ⌈log2(1/tol)⌉ + 1 au plus (vérification comprise).
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if verify:
        if tracker is not None and not tracker.can(1):
            return x_adv
        if oracle.phi(x_star, c_star, x_adv) != 1:
            raise NotAdversarialError("le point de départ de la dichotomie n'est pas adversarial")

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        if tracker is not None and not tracker.can(1):
            break
        mid = 0.5 * (lo + hi)
        if oracle.phi(x_star, c_star, _interpolate(x_star, x_adv, mid, norm)) == 1:
            hi = mid
        else:
            lo = mid
    return _interpolate(x_star, x_adv, hi, norm)


def random_adversarial_init(oracle, x_star: np.ndarray, c_star: int, norm: str,
                            cfg: AttackConfig, rng: np.random.Generator,
                            tracker: QueryTracker) -> Optional[np.ndarray]:
    """
    Recherche d'un point adversarial par tirages aléatoires (au plus init_draws).

    ℓ2 : uniforme dans [0,1]^d. ℓ∞ : x_star + λ·s, s motif de signes aléatoire,
    λ croissant de sfa_eps0 vers 1.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    dim = x_star.shape[0]
    for i in range(cfg.init_draws):
        if not tracker.can(1):
            return None
        if norm == "linf":
            lam = cfg.sfa_eps0 + (1.0 - cfg.sfa_eps0) * i / max(cfg.init_draws - 1, 1)
            candidate = x_star + lam * rng.choice([-1.0, 1.0], size=dim)
        else:
            candidate = rng.uniform(0.0, 1.0, size=dim)
        candidate = oracle.clip(candidate)
        if oracle.phi(x_star, c_star, candidate) == 1:
            return candidate
    logger.debug("Aucune initialisation adversariale en %d tirages", cfg.init_draws)
    return None


def finalize(oracle, x_star: np.ndarray, c_star: int, x_best: Optional[np.ndarray],
             tracker: QueryTracker, trace: List[Tuple[int, float]], name: str,
             norm: str) -> AttackResult:
    """Requête de confirmation finale et calcul exact des distances"""
    if x_best is None:
        return AttackResult(None, math.inf, math.inf, tracker.used, False, trace, name, norm)
    success = False
    if tracker.remaining >= tracker.cost:
        success = oracle.phi(x_star, c_star, x_best) == 1
    return AttackResult(
        x_adv=x_best,
        l2_dist=lp_distance(x_best, x_star, "l2"),
        linf_dist=lp_distance(x_best, x_star, "linf"),
        queries_used=tracker.used,
        success=bool(success),
        trace=trace,
        attack=name,
        norm=norm,
    )
