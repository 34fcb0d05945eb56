"""
Données et entraînement du détecteur F_Q.

Convention d'étiquettes : classe 0 = requête d'attaque (y1 = F_Q[0]),
classe 1 = entrée propre.
"""
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field
from sklearn.metrics import confusion_matrix
from tqdm import tqdm

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import DETECTOR_ARCH
from src.attacks.primitives import bisect_to_boundary, sample_unit_sphere
from src.data.preprocessing import LabeledDataset
from src.defense.predcoin import DefenseState, detect_batch, top3_batch
from src.models.network import DenseNetwork
from src.models.trainer import ClassifierTrainer, TrainConfig
from src.oracle.oracles import HardLabelOracle
from src.utils.errors import DegenerateDataError, EmptyDatasetError

logger = logging.getLogger(__name__)

ADVERSARIAL, CLEAN = 0, 1


class SamplerConfig(BaseModel):
    """Paramètres de la procédure d'échantillonnage G(x*)"""
    n_sphere: int = Field(default=10, ge=0)
    # δ log-uniforme dans [delta_low, delta_high] / √d
    delta_low: float = Field(default=1e-3, gt=0.0)
    delta_high: float = Field(default=1e-1, gt=0.0)
    init_draws: int = Field(default=200, ge=1)
    bisect_tol: float = Field(default=1e-3, gt=0.0, lt=1.0)
    balance: bool = True


class FQTrainConfig(TrainConfig):
    holdout: float = Field(default=0.2, gt=0.0, lt=1.0)
    gamma: float = Field(default=0.5, ge=0.0, le=1.0)


@dataclass
class FQDataset:
    features: np.ndarray  # (n, 3), top-3 triés
    labels: np.ndarray    # 0 = requête d'attaque, 1 = propre
    n_skipped: int = 0

    def __len__(self) -> int:
        return self.labels.shape[0]

    def as_labeled(self) -> LabeledDataset:
        return LabeledDataset(self.features, self.labels)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            np.savez(f, features=self.features, labels=self.labels,
                     n_skipped=np.array(self.n_skipped))
        return path

    @classmethod
    def load(cls, path: Path) -> "FQDataset":
        with np.load(Path(path)) as data:
            return cls(data["features"], data["labels"], int(data["n_skipped"]))


@dataclass
class FQMetrics:
    fp_rate: float
    fn_rate: float
    accuracy: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("fp_rate", "fn_rate", "accuracy", "tp", "fp", "tn", "fn")}


def _starting_point(oracle, x_star, c_star, base_data, cfg, rng):
    """Tirage uniforme adversarial, sinon une autre entrée d'étiquette différente"""
    for _ in range(cfg.init_draws):
        candidate = rng.uniform(0.0, 1.0, size=x_star.shape[0])
        if oracle.phi(x_star, c_star, candidate) == 1:
            return candidate
    others = np.flatnonzero(base_data.y != c_star)
    if others.size:
        candidate = base_data.X[rng.choice(others)]
        if oracle.phi(x_star, c_star, candidate) == 1:
            return candidate
    return None


def generate_fq_dataset(target: DenseNetwork, base_data: LabeledDataset,
                        cfg: SamplerConfig, rng: np.random.Generator) -> FQDataset:
    """
    Construit le jeu d'entraînement de F_Q.

    Côté propre : top-3 des sorties de la cible sur base_data.
    Côté attaque : pour chaque x*, point frontière x_t (init aléatoire puis
    dichotomie) et n_sphere points x_t + δ·u, δ log-uniforme.
    """
    base_data.check()
    P = target.forward_batch(base_data.X)
    clean = top3_batch(P)
    predicted = np.argmax(P, axis=1)
    # les étiquettes prédites servent de repli pour l'initialisation
    by_prediction = LabeledDataset(base_data.X, predicted)

    oracle = HardLabelOracle(target)
    dim = base_data.dim
    scale = 1.0 / np.sqrt(dim)
    adversarial, skipped = [], 0
    for i in tqdm(range(len(base_data)), desc="Génération F_Q", disable=None, leave=False):
        x_star, c_star = base_data.X[i], int(predicted[i])
        start = _starting_point(oracle, x_star, c_star, by_prediction, cfg, rng)
        if start is None:
            skipped += 1
            continue
        x_t = bisect_to_boundary(oracle, x_star, c_star, start, cfg.bisect_tol, "l2", verify=False)
        points = [x_t[None, :]]
        if cfg.n_sphere > 0:
            deltas = scale * np.exp(rng.uniform(np.log(cfg.delta_low), np.log(cfg.delta_high),
                                                size=(cfg.n_sphere, 1)))
            u = sample_unit_sphere(rng, cfg.n_sphere, dim)
            points.append(oracle.clip(x_t + deltas * u))
        adversarial.append(top3_batch(target.forward_batch(np.vstack(points))))

    if skipped:
        logger.warning("%d entrées ignorées (aucune initialisation adversariale)", skipped)
    adv = np.vstack(adversarial) if adversarial else np.empty((0, 3))
    if cfg.balance and adv.shape[0] > clean.shape[0]:
        adv = adv[np.sort(rng.choice(adv.shape[0], size=clean.shape[0], replace=False))]

    features = np.vstack([clean, adv])
    labels = np.concatenate([np.full(clean.shape[0], CLEAN), np.full(adv.shape[0], ADVERSARIAL)])
    logger.info("Jeu F_Q: %d propres, %d requêtes d'attaque", clean.shape[0], adv.shape[0])
    return FQDataset(features, labels.astype(np.int64), skipped)


def _metrics(y_true: np.ndarray, flagged: np.ndarray) -> FQMetrics:
    if y_true.shape[0] == 0:
        raise EmptyDatasetError("jeu d'évaluation F_Q vide")
    y_pred = np.where(flagged, ADVERSARIAL, CLEAN)
    (tp, fn), (fp, tn) = confusion_matrix(y_true, y_pred, labels=[ADVERSARIAL, CLEAN])
    n_clean, n_adv = fp + tn, tp + fn
    return FQMetrics(
        fp_rate=float(fp / n_clean) if n_clean else 0.0,
        fn_rate=float(fn / n_adv) if n_adv else 0.0,
        accuracy=float((tp + tn) / y_true.shape[0]),
        tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn),
    )


def fq_metrics(ds: DefenseState, eval_set: FQDataset) -> FQMetrics:
    """Taux FP (propre signalé) / FN (requête d'attaque manquée) au γ courant"""
    if len(eval_set) == 0:
        raise EmptyDatasetError("jeu d'évaluation F_Q vide")
    flagged, _ = detect_batch(ds, eval_set.features)
    return _metrics(eval_set.labels, flagged)


def train_fq(fq_data: FQDataset, cfg: FQTrainConfig) -> Tuple[DenseNetwork, FQMetrics]:
    """Entraîne F_Q (architecture 3-64-64-32-2) et l'évalue sur 20 % retenus"""
    if len(fq_data) == 0:
        raise EmptyDatasetError("jeu F_Q vide")
    if np.unique(fq_data.labels).size < 2:
        raise DegenerateDataError("le jeu F_Q ne contient qu'une seule classe")
    train, held = fq_data.as_labeled().split(cfg.holdout, cfg.seed)
    train_cfg = TrainConfig(**cfg.model_dump(include=set(TrainConfig.model_fields)))
    net, _ = ClassifierTrainer(train_cfg).train(train, DETECTOR_ARCH)

    y1 = net.forward_batch(held.X)[:, 0]
    metrics = _metrics(held.y, y1 >= cfg.gamma)
    logger.info("F_Q: accuracy=%.4f FP=%.4f FN=%.4f", metrics.accuracy,
                metrics.fp_rate, metrics.fn_rate)
    return net, metrics
