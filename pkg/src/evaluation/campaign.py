"""
Campagne d'évaluation : attaques appariées sur la cible non défendue (bras
"base") et défendue (bras "defended"), agrégats, rapport JSON et courbes ASR.

Chaque exécution (image graine, répétition) possède sa propre graine
base_seed ⊕ index et ses propres oracles : l'exécution parallèle donne le
même rapport que l'exécution séquentielle.
"""
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from tqdm import tqdm

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import (
    ADAPTIVE_CONFIG, DEFENSE_CONFIG, EXPERIMENT_CONFIG, N_WORKERS, REPORTS_DIR,
)
from src.adaptive.bypass import make_bypass_estimator
from src.adaptive.uncertainty import UncertaintyAwareOracle
from src.attacks import get_attack
from src.attacks.primitives import AttackConfig, AttackResult
from src.data.idx_loader import load_idx
from src.data.preprocessing import LabeledDataset, correctly_classified, make_blobs
from src.defense.predcoin import DefenseConfig, DefenseState, FlipMode, detect_batch
from src.evaluation.metrics import accuracy_loss, asr, inference_time_ratio, median_lp
from src.models.serialization import load_model
from src.monitoring import prometheus_metrics as metrics
from src.oracle.oracles import HardLabelOracle
from src.utils.errors import ConfigError, EmptyDatasetError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BASE, DEFENDED = "base", "defended"


class DatasetSpec(BaseModel):
    """Blobs synthétiques ou fichiers IDX (sous-ensemble de `limit` exemples)"""
    kind: Literal["blobs", "idx"] = "blobs"
    n_per_class: int = Field(default=200, ge=1)
    dim: int = Field(default=2, ge=1)
    separation: float = Field(default=6.0, gt=0.0)
    sigma: float = Field(default=0.05, gt=0.0)
    seed: int = Field(default=0, ge=0)
    images_path: Optional[str] = None
    labels_path: Optional[str] = None
    limit: Optional[int] = Field(default=EXPERIMENT_CONFIG["test_limit"], ge=1)

    @model_validator(mode="after")
    def _paths(self):
        if self.kind == "idx" and (not self.images_path or not self.labels_path):
            raise ValueError("images_path et labels_path requis pour un jeu IDX")
        return self

    def load(self) -> LabeledDataset:
        if self.kind == "idx":
            return load_idx(Path(self.images_path), Path(self.labels_path), self.limit)
        return make_blobs(self.n_per_class, self.dim, self.separation, self.sigma, self.seed)


class ExperimentConfig(BaseModel):
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    target_path: str
    defense_path: Optional[str] = None
    # None : mode du fichier de défense
    defense_mode: Optional[FlipMode] = None
    attack: Literal["ba", "signopt", "hsja", "sfa"] = "hsja"
    norm: Literal["l2", "linf"] = "l2"
    # un budget nul est accepté (toutes les exécutions échouent)
    budgets: List[int] = Field(default_factory=lambda: list(EXPERIMENT_CONFIG["budgets"]), min_length=1)
    n_seed_images: int = Field(default=EXPERIMENT_CONFIG["n_seed_images"], ge=1)
    base_seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: str = str(REPORTS_DIR)
    adaptive: Literal["none", "bypass", "uncertainty"] = "none"
    k: int = Field(default=ADAPTIVE_CONFIG["k"], ge=1)
    vote: Literal["majority", "consensus"] = ADAPTIVE_CONFIG["vote"]
    bypass_delta_max_ratio: float = Field(default=ADAPTIVE_CONFIG["bypass_delta_max_ratio"], gt=0.0)
    repeats: int = Field(default=1, ge=1)
    workers: int = Field(default=N_WORKERS, ge=1)
    asr_epsilons: Optional[List[float]] = None
    # champs supplémentaires d'AttackConfig (B0, ba_window, ...)
    attack_options: Dict[str, Any] = Field(default_factory=dict)
    timing: bool = True

    @field_validator("budgets")
    @classmethod
    def _budgets(cls, v):
        if any(b < 0 for b in v):
            raise ValueError("budgets négatifs")
        return v

    @field_validator("defense_path")
    @classmethod
    def _none(cls, v):
        return None if v in (None, "", "none") else v

    @model_validator(mode="after")
    def _adaptive(self):
        if self.adaptive == "bypass" and self.attack != "hsja":
            raise ValueError("l'attaque de contournement ne s'applique qu'à HSJA")
        if self.adaptive != "none" and self.defense_path is None:
            raise ValueError("une attaque adaptative demande une défense")
        return self

    @classmethod
    def build(cls, **kwargs) -> "ExperimentConfig":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path: Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"fichier de configuration introuvable: {path}")
        try:
            return cls.model_validate(json.loads(path.read_text()))
        except (ValidationError, json.JSONDecodeError) as e:
            raise ConfigError(f"configuration invalide ({path}): {e}") from e

    def attack_config(self, budget: int, seed: int) -> AttackConfig:
        return AttackConfig.build(**{**self.attack_options, "norm": self.norm,
                                     "query_budget": budget, "seed": seed})


def derive_seed(base_seed: int, index: int) -> int:
    return int(base_seed) ^ int(index)


@dataclass
class Report:
    config: Dict[str, Any]
    rows: List[Dict[str, Any]]
    aggregates: Dict[str, Any]
    seeds: List[int]
    accuracy_loss: Optional[Dict[str, float]] = None
    fq: Optional[Dict[str, Any]] = None
    timing: Dict[str, float] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def deterministic_dict(self) -> Dict[str, Any]:
        """Rapport sans les champs de temps (comparaisons de reproductibilité)"""
        d = self.to_dict()
        d.pop("timing")
        return d

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @classmethod
    def load(cls, path: Path) -> "Report":
        return cls(**json.loads(Path(path).read_text()))


# ─────────────────────────────────────────────────────────────────────────────
# Exécutions
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class _Context:
    cfg: ExperimentConfig
    target: Any
    defense: Optional[DefenseState]


def _run_sample(ctx: _Context, task: Dict[str, Any]) -> List[Dict[str, Any]]:
    """Toutes les exécutions (budgets × bras) d'une image graine"""
    cfg = ctx.cfg
    attack = get_attack(cfg.attack)
    x_star = np.asarray(task["x"], dtype=np.float64)
    c_star, seed = int(task["label"]), int(task["seed"])
    arms = [BASE] if ctx.defense is None else [BASE, DEFENDED]

    rows = []
    for budget in cfg.budgets:
        for arm in arms:
            if arm == BASE:
                oracle = HardLabelOracle(ctx.target)
            else:
                oracle = HardLabelOracle(defense=ctx.defense, rng=np.random.default_rng([seed, 1]))
            attacked, kwargs, estimator = oracle, {}, None
            if arm == DEFENDED and cfg.adaptive == "uncertainty":
                attacked = UncertaintyAwareOracle(oracle, cfg.k, cfg.vote)
            elif arm == DEFENDED and cfg.adaptive == "bypass":
                estimator = make_bypass_estimator(ctx.defense, cfg.bypass_delta_max_ratio)
                kwargs["gradient_estimator"] = estimator

            result = attack(attacked, x_star, c_star, cfg.attack_config(budget, seed), **kwargs)
            rows.append({
                "index": task["index"],
                "repeat": task["repeat"],
                "sample": task["sample"],
                "arm": arm,
                "budget": int(budget),
                "seed": seed,
                "label": c_star,
                "success": bool(result.success),
                "l2": None if math.isinf(result.l2_dist) else float(result.l2_dist),
                "linf": None if math.isinf(result.linf_dist) else float(result.linf_dist),
                "queries": int(oracle.query_count),
                "flags": int(oracle.flag_count),
                "bypass_feasible_fraction": (float(np.mean(estimator.fractions))
                                             if estimator is not None and estimator.fractions else None),
            })
    return rows


def row_result(row: Dict[str, Any]) -> AttackResult:
    """AttackResult minimal reconstruit depuis une ligne du rapport"""
    l2 = math.inf if row["l2"] is None else row["l2"]
    linf = math.inf if row["linf"] is None else row["linf"]
    return AttackResult(None, l2, linf, row["queries"], row["success"])


def default_epsilons(rows: List[Dict[str, Any]], norm: str, n: int = 21) -> List[float]:
    finite = [r[norm] for r in rows if r[norm] is not None]
    top = max(finite) if finite else 0.0
    return [float(e) for e in np.linspace(0.0, top, n)]


def recompute_aggregates(rows: List[Dict[str, Any]], norm: str, budgets: List[int],
                         epsilons: List[float]) -> Dict[str, Any]:
    """
    Agrégats recalculables depuis les lignes : médiane ℓp par (bras, budget)
    sur toutes les répétitions, médianes par répétition (moyenne, min, max),
    ASR par ε et taux FN du détecteur sur les requêtes de l'attaque.
    """
    arms = sorted({r["arm"] for r in rows}, key=[BASE, DEFENDED].index)
    median, per_repeat, curves, fn_rate = {}, {}, {}, None
    for arm in arms:
        median[arm], per_repeat[arm], curves[arm] = {}, {}, {}
        for budget in budgets:
            cell = [r for r in rows if r["arm"] == arm and r["budget"] == budget]
            results = [row_result(r) for r in cell]
            key = str(budget)
            median[arm][key] = _safe_median(results, norm)
            medians = [
                _safe_median([row_result(r) for r in cell if r["repeat"] == rep], norm)
                for rep in sorted({r["repeat"] for r in cell})
            ]
            valid = [m for m in medians if m is not None]
            per_repeat[arm][key] = {
                "medians": medians,
                "mean": float(np.mean(valid)) if valid else None,
                "min": float(np.min(valid)) if valid else None,
                "max": float(np.max(valid)) if valid else None,
            }
            curves[arm][key] = [asr(results, eps, norm) for eps in epsilons] if results else []
        if arm == DEFENDED:
            queries = sum(r["queries"] for r in rows if r["arm"] == arm)
            flags = sum(r["flags"] for r in rows if r["arm"] == arm)
            fn_rate = 1.0 - flags / queries if queries else None

    out = {"median": median, "per_repeat": per_repeat, "epsilons": list(epsilons), "asr": curves,
           "attack_fn_rate": fn_rate}
    if DEFENDED in median:
        out["median_ratio"] = {
            key: (median[DEFENDED][key] / median[BASE][key]
                  if median[DEFENDED][key] is not None and median[BASE][key] else None)
            for key in median[BASE]
        }
    return out


def _safe_median(results: List[AttackResult], norm: str) -> Optional[float]:
    try:
        return median_lp(results, norm)
    except EmptyDatasetError:
        return None


def asr_frame(report: Report, budget: int) -> pd.DataFrame:
    """Courbe ASR au format CSV : epsilon, asr_base, asr_defended (NaN sans défense)"""
    agg, key = report.aggregates, str(budget)
    eps = agg["epsilons"]
    defended = agg["asr"].get(DEFENDED, {}).get(key) or [math.nan] * len(eps)
    return pd.DataFrame({
        "epsilon": eps,
        "asr_base": agg["asr"][BASE][key],
        "asr_defended": defended,
    })


def _load_defense(cfg: ExperimentConfig, target) -> Optional[DefenseState]:
    if cfg.defense_path is None:
        return None
    dc = DefenseConfig.load(Path(cfg.defense_path))
    mode = cfg.defense_mode if cfg.defense_mode is not None else dc.mode
    if mode is FlipMode.OFF:
        return None
    return DefenseState(target, load_model(Path(dc.fq_path)), dc.gamma, mode, dc.seed)


def run_campaign(cfg: ExperimentConfig, write: bool = True) -> Report:
    """
    Exécute la campagne décrite par `cfg` et écrit report.json, les courbes
    ASR (asr_budget<B>.csv) et éventuellement metrics.prom dans output_dir.
    """
    started = time.perf_counter()
    target = load_model(Path(cfg.target_path))
    defense = _load_defense(cfg, target)
    data = cfg.dataset.load()
    seeds_data = correctly_classified(target, data).head(cfg.n_seed_images)
    if len(seeds_data) == 0:
        raise EmptyDatasetError("aucune entrée bien classée pour amorcer les attaques")
    if len(seeds_data) < cfg.n_seed_images:
        logger.warning("Seulement %d images graines disponibles (%d demandées)",
                       len(seeds_data), cfg.n_seed_images)

    n = len(seeds_data)
    tasks = []
    for repeat in range(cfg.repeats):
        for i in range(n):
            index = repeat * n + i
            tasks.append({"index": index, "repeat": repeat, "sample": i,
                          "seed": derive_seed(cfg.base_seed, index),
                          "x": seeds_data.X[i], "label": int(seeds_data.y[i])})

    ctx = _Context(cfg, target, defense)
    run = partial(_run_sample, ctx)
    logger.info("Campagne %s/%s: %d exécutions, budgets %s, défense=%s", cfg.attack, cfg.norm,
                len(tasks), cfg.budgets, defense.mode.value if defense else "aucune")
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(tqdm(pool.map(run, tasks), total=len(tasks), desc="Campagne",
                                disable=None, leave=False))
    else:
        batches = [run(t) for t in tqdm(tasks, desc="Campagne", disable=None, leave=False)]
    rows = sorted((r for batch in batches for r in batch),
                  key=lambda r: (r["index"], r["budget"], r["arm"]))

    epsilons = cfg.asr_epsilons if cfg.asr_epsilons is not None else default_epsilons(rows, cfg.norm)
    aggregates = recompute_aggregates(rows, cfg.norm, cfg.budgets, epsilons)

    loss, fq, timing = None, None, {}
    if defense is not None:
        loss = asdict(accuracy_loss(target, defense, data, DEFENSE_CONFIG["eval_seed"]))
        flagged, _ = detect_batch(defense, target.forward_batch(seeds_data.X))
        fq = {"fp_rate_seed_images": float(np.mean(flagged)),
              "fn_rate_attack_queries": aggregates["attack_fn_rate"]}
        if cfg.timing:
            batch = data.X[:EXPERIMENT_CONFIG["timing_batch"]]
            timing["inference_time_ratio"] = inference_time_ratio(
                target, defense, batch, EXPERIMENT_CONFIG["timing_reps"])
    timing["duration_seconds"] = time.perf_counter() - started

    report = Report(
        config=cfg.model_dump(mode="json", exclude={"workers"}),
        rows=rows,
        aggregates=aggregates,
        seeds=[t["seed"] for t in tasks],
        accuracy_loss=loss,
        fq=fq,
        timing=timing,
    )
    for r in rows:
        metrics.track_attack_run(cfg.attack, r["arm"], r["success"], r["queries"])
        if r["arm"] == DEFENDED:
            metrics.track_flags(defense.mode.value, r["flags"])
    metrics.track_campaign_duration(timing["duration_seconds"])

    if write:
        out = Path(cfg.output_dir)
        report.save(out / "report.json")
        for budget in cfg.budgets:
            asr_frame(report, budget).to_csv(out / f"asr_budget{budget}.csv", index=False)
        metrics.write_metrics(out / "metrics.prom")
        logger.info("Rapport écrit dans %s", out)
    return report
