"""
Vérification empirique de l'estimation de gradient sur oracles analytiques.

- convergence : cos∠(estimation, ∇S) contre la borne
  1 − 9L²δ²(d−1)²/(8‖∇S‖²), avec une marge Monte-Carlo 5/√B
- effondrement : φ corrompu par une pièce équilibrée, l'estimation tend vers 0
- projection : ⟨∇S/‖∇S‖, u⟩² suit une loi Beta(1/2, (d−1)/2)
"""
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.primitives import estimate_gradient, sample_unit_sphere
from src.oracle.models import QuadraticModel
from src.oracle.oracles import HardLabelOracle
from src.utils.errors import ConfigError, DegenerateDataError

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["d", "delta", "B", "cos_measured", "bound_rhs", "slack", "pass"]


def cos_angle(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateDataError("cosinus indéfini pour un vecteur nul")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def adversarial_normal(oracle, x_t: np.ndarray, c_star: int) -> np.ndarray:
    """∇S orienté vers le côté adversarial (φ = +1) pour un oracle analytique"""
    _, grad = oracle.analytic_margin_gradient(x_t)
    return grad if c_star == 0 else -grad


def quadratic_setup(d: int, radius: float = 1.0, kappa: float = 1.0
                    ) -> Tuple[HardLabelOracle, np.ndarray, int, np.ndarray]:
    """
    Oracle quadratique centré en 0.5·1, point frontière exact x_t et point
    source x* à l'extérieur de la boule (classe 0).
    """
    model = QuadraticModel(np.full(d, 0.5), radius, kappa)
    direction = np.ones(d) / math.sqrt(d)
    x_t = model.boundary_point(direction)
    x_star = model.center + 2.0 * radius * direction
    return HardLabelOracle(model), x_star, 0, x_t


def bound_rhs(d: int, delta: float, grad_norm: float, lipschitz: float) -> float:
    return 1.0 - 9.0 * lipschitz ** 2 * delta ** 2 * (d - 1) ** 2 / (8.0 * grad_norm ** 2)


@dataclass
class ConvergenceRow:
    d: int
    delta: float
    B: int
    cos_measured: float
    bound_rhs: float
    slack: float
    passed: bool
    # composante de l'estimation brute le long de la normale
    raw_projection: float = math.nan
    degenerate: bool = False


@dataclass
class ConvergenceReport:
    rows: List[ConvergenceRow] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([asdict(r) for r in self.rows])
        if df.empty:
            return pd.DataFrame(columns=REPORT_COLUMNS)
        return df.rename(columns={"passed": "pass"})

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame()[REPORT_COLUMNS].to_csv(path, index=False)
        return path


def _convergence_row(args) -> ConvergenceRow:
    d, delta, B, seed, radius = args
    slack = 5.0 / math.sqrt(B)
    oracle, x_star, c_star, x_t = quadratic_setup(d, radius)
    normal = adversarial_normal(oracle, x_t, c_star)
    rhs = bound_rhs(d, delta, float(np.linalg.norm(normal)), oracle.target.lipschitz)
    if delta == 0.0:
        return ConvergenceRow(d, delta, B, math.nan, rhs, slack, True, degenerate=True)

    # mêmes tirages pour tous les δ d'une même dimension
    rng = np.random.default_rng([seed, d])
    est = estimate_gradient(oracle, x_star, c_star, x_t, delta, B, rng)
    cos = 0.0 if est.is_zero else cos_angle(est.direction, normal)
    projection = float(est.raw @ normal / np.linalg.norm(normal))
    return ConvergenceRow(d, delta, B, cos, rhs, slack, cos >= rhs - slack, projection)


def convergence_experiment(d_list: Sequence[int], delta_list: Sequence[float], B: int,
                           seed: int = 0, radius: float = 1.0,
                           workers: int = 1) -> ConvergenceReport:
    """
    Une ligne par couple (d, δ) ; succès ssi cos_measured >= bound_rhs − 5/√B.
    δ = 0 donne une ligne marquée dégénérée, sans estimation.
    """
    if B < 1:
        raise ConfigError("B doit être >= 1")
    if any(delta < 0 for delta in delta_list):
        raise ConfigError("delta doit être >= 0")
    tasks = [(int(d), float(delta), int(B), seed, radius) for d in d_list for delta in delta_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_convergence_row, tasks))
    else:
        rows = [_convergence_row(t) for t in tasks]
    report = ConvergenceReport(rows)
    logger.info("Convergence: %d/%d lignes valides", sum(r.passed for r in rows), len(rows))
    return report


@dataclass
class FlipCollapseStats:
    mean_norm: float
    mean_cos: float
    std_cos: float
    baseline_mean_norm: float
    baseline_mean_cos: float
    # dispersion de l'estimation non corrompue : sqrt(Σ_j Var(raw_j))
    baseline_se: float
    trials: int
    flip_prob: float


def flip_collapse_experiment(d: int, delta: float, B: int, trials: int, seed: int = 0,
                             flip_prob: float = 0.5, radius: float = 1.0) -> FlipCollapseStats:
    """
    Compare l'estimation de gradient avec φ corrompu (inversé avec probabilité
    flip_prob) à l'estimation non corrompue, à tirages de directions égaux.
    """
    if not 0.0 <= flip_prob <= 1.0:
        raise ConfigError("flip_prob hors de [0,1]")
    if trials < 1:
        raise ConfigError("au moins un essai")
    oracle, x_star, c_star, x_t = quadratic_setup(d, radius)
    normal = adversarial_normal(oracle, x_t, c_star)

    flipped_raw, flipped_cos, base_raw, base_cos = [], [], [], []
    for i in range(trials):
        coin = np.random.default_rng([seed, i, 1])

        def corrupted(points):
            phis = oracle.phi_batch(c_star, points)
            return np.where(coin.random(phis.shape[0]) < flip_prob, -phis, phis)

        est = estimate_gradient(oracle, x_star, c_star, x_t, delta, B,
                                np.random.default_rng([seed, i]), phi_fn=corrupted)
        base = estimate_gradient(oracle, x_star, c_star, x_t, delta, B,
                                 np.random.default_rng([seed, i]))
        flipped_raw.append(est.raw)
        flipped_cos.append(0.0 if est.is_zero else cos_angle(est.raw, normal))
        base_raw.append(base.raw)
        base_cos.append(0.0 if base.is_zero else cos_angle(base.raw, normal))

    flipped_raw, base_raw = np.array(flipped_raw), np.array(base_raw)
    spread = float(np.sqrt(np.var(base_raw, axis=0, ddof=1).sum())) if trials > 1 else 0.0
    result = FlipCollapseStats(
        mean_norm=float(np.linalg.norm(flipped_raw, axis=1).mean()),
        mean_cos=float(np.mean(flipped_cos)),
        std_cos=float(np.std(flipped_cos)),
        baseline_mean_norm=float(np.linalg.norm(base_raw, axis=1).mean()),
        baseline_mean_cos=float(np.mean(base_cos)),
        baseline_se=spread,
        trials=trials,
        flip_prob=flip_prob,
    )
    logger.info("Effondrement (p=%.2f): cos moyen %.4f, norme moyenne %.5f",
                flip_prob, result.mean_cos, result.mean_norm)
    return result


@dataclass
class BetaProjectionReport:
    d: int
    n_samples: int
    mean: float
    var: float
    expected_mean: float
    expected_var: float
    mean_se: float
    var_se: float
    passed: bool


def beta_projection_check(d: int, n_samples: int, seed: int = 0,
                          direction: Optional[np.ndarray] = None) -> BetaProjectionReport:
    """
    Moments empiriques de ⟨e, u⟩² (u uniforme sur la sphère) contre ceux de
    Beta(1/2, (d−1)/2) : moyenne 1/d, variance 2(d−1)/(d²(d+2)).
    Succès ssi les deux écarts restent sous 3 erreurs standard.
    """
    if d < 2:
        raise ConfigError("d >= 2 requis")
    if n_samples < 10_000:
        raise ConfigError("au moins 10^4 tirages")
    e = np.ones(d) if direction is None else np.asarray(direction, dtype=np.float64)
    e = e / np.linalg.norm(e)

    rng = np.random.default_rng(seed)
    proj = (sample_unit_sphere(rng, n_samples, d) @ e) ** 2

    mean_th, var_th, _, kurt = (float(m) for m in stats.beta(0.5, (d - 1) / 2.0).stats(moments="mvsk"))
    mean_se = math.sqrt(var_th / n_samples)
    # Var(s²) ≈ σ⁴ (2/(n−1) + κ/n), κ = kurtosis en excès
    var_se = var_th * math.sqrt(2.0 / (n_samples - 1) + kurt / n_samples)
    mean, var = float(proj.mean()), float(proj.var(ddof=1))
    passed = abs(mean - mean_th) <= 3 * mean_se and abs(var - var_th) <= 3 * var_se
    return BetaProjectionReport(d, n_samples, mean, var, mean_th, var_th, mean_se, var_se, passed)
