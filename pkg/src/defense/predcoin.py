"""
Défense PredCoin à l'inférence.

Chaîne : p = C(x) → top-3 trié → F_Q → y1 ; si y1 >= γ la requête est
signalée et l'étiquette renvoyée est remplacée par la deuxième classe
la plus probable, soit au hasard (mode probabilistic, pièce équilibrée),
soit de façon déterministe selon la parité d'une somme de la première
couche (mode parity).
"""
import json
import logging
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.models.network import DenseNetwork
from src.models.serialization import load_model
from src.oracle.models import hard_labels
from src.utils.errors import ConfigError, MissingArtifactError

logger = logging.getLogger(__name__)

PARITY_SCALE = 1e4


class FlipMode(str, Enum):
    OFF = "off"
    PROBABILISTIC = "probabilistic"
    PARITY = "parity"

    @classmethod
    def from_cli(cls, value: str) -> "FlipMode":
        aliases = {"none": cls.OFF, "prob": cls.PROBABILISTIC}
        try:
            return aliases.get(value) or cls(value)
        except ValueError as e:
            raise ConfigError(f"mode de défense inconnu: {value}") from e


@dataclass(frozen=True)
class DefenseState:
    """
    État de la défense : cible, détecteur F_Q (3 → ... → 2), seuil γ et mode.

    `force_flag` signale toutes les entrées (mode de test) ; y1 reste calculé.
    """
    target: object
    fq: DenseNetwork
    gamma: float
    mode: FlipMode = FlipMode.PROBABILISTIC
    seed: int = 0
    force_flag: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma hors de [0,1]: {self.gamma}")
        if self.fq.input_dim != 3 or self.fq.output_dim != 2:
            raise ConfigError(f"F_Q doit être 3 -> 2, reçu {self.fq.arch}")
        object.__setattr__(self, "mode", FlipMode(self.mode))

    def with_mode(self, mode: FlipMode) -> "DefenseState":
        return DefenseState(self.target, self.fq, self.gamma, FlipMode(mode), self.seed, self.force_flag)

    def with_gamma(self, gamma: float) -> "DefenseState":
        return DefenseState(self.target, self.fq, gamma, self.mode, self.seed, self.force_flag)


def top3_batch(P: np.ndarray) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    ordered = -np.sort(-P, axis=1)[:, :3]
    if ordered.shape[1] < 3:
        ordered = np.pad(ordered, ((0, 0), (0, 3 - ordered.shape[1])))
    return ordered


def top3_descending(p: np.ndarray) -> np.ndarray:
    """Trois plus grandes composantes par ordre décroissant (complété par des zéros si m < 3)"""
    return top3_batch(p)[0]


def detect_batch(ds: DefenseState, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    y1 = ds.fq.forward_batch(top3_batch(P))[:, 0]
    if ds.force_flag:
        return np.ones(y1.shape[0], dtype=bool), y1
    # y1 < 1 sous softmax : γ = 1 ne signale jamais, même si y1 est arrondi à 1.0
    if ds.gamma >= 1.0:
        return np.zeros(y1.shape[0], dtype=bool), y1
    return y1 >= ds.gamma, y1


def detect(ds: DefenseState, p: np.ndarray) -> Tuple[bool, float]:
    flagged, y1 = detect_batch(ds, p)
    return bool(flagged[0]), float(y1[0])


def second_argmax_batch(P: np.ndarray, top: Optional[np.ndarray] = None) -> np.ndarray:
    """Deuxième classe la plus probable, égalités vers le plus petit indice"""
    P = np.array(np.atleast_2d(P), dtype=np.float64)
    if top is None:
        top = np.argmax(P, axis=1)
    P[np.arange(P.shape[0]), top] = -np.inf
    return np.argmax(P, axis=1)


def second_argmax(p: np.ndarray) -> int:
    return int(second_argmax_batch(p)[0])


def parity_digit(value) -> np.ndarray:
    """Dernier chiffre de round(value × 10⁴), arrondi demi-entier loin de zéro"""
    scaled = np.asarray(value, dtype=np.float64) * PARITY_SCALE
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return (np.abs(rounded) % 10).astype(np.int64)


def parity_flags_batch(ds: DefenseState, X: np.ndarray) -> np.ndarray:
    return parity_digit(ds.target.first_layer_sum_batch(X)) % 2 == 0


def parity_flag(ds: DefenseState, x: np.ndarray) -> bool:
    """Vrai (on échange l'étiquette) si le dernier chiffre est pair"""
    x = np.asarray(x, dtype=np.float64)
    return bool(parity_flags_batch(ds, x[None, :])[0])


def defended_predict_batch(ds: DefenseState, X: np.ndarray, rng: np.random.Generator
                           ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Étiquettes défendues pour un lot.

    Returns:
        (labels, flagged) ; flagged vaut False partout en mode off
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    P = ds.target.forward_batch(X)
    labels = hard_labels(ds.target, X, P)
    if ds.mode is FlipMode.OFF:
        return labels, np.zeros(labels.shape[0], dtype=bool)

    flagged, _ = detect_batch(ds, P)
    substitute = second_argmax_batch(P, labels)
    if ds.mode is FlipMode.PROBABILISTIC:
        swap = flagged & (rng.random(labels.shape[0]) < 0.5)
    else:
        swap = flagged & parity_flags_batch(ds, X)
    return np.where(swap, substitute, labels), flagged


def defended_predict(ds: DefenseState, x: np.ndarray, rng: np.random.Generator) -> int:
    x = np.asarray(x, dtype=np.float64)
    labels, _ = defended_predict_batch(ds, x[None, :], rng)
    return int(labels[0])


class DefenseConfig(BaseModel):
    """Configuration sérialisée de la défense (JSON)"""
    gamma: float = Field(ge=0.0, le=1.0)
    mode: FlipMode = FlipMode.PROBABILISTIC
    fq_path: str
    target_path: str
    seed: int = Field(default=0, ge=0)

    @classmethod
    def load(cls, path: Path) -> "DefenseConfig":
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(f"configuration de défense introuvable: {path}")
        try:
            return cls.model_validate(json.loads(path.read_text()))
        except (ValidationError, json.JSONDecodeError) as e:
            raise ConfigError(f"configuration de défense invalide ({path}): {e}") from e

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True))
        logger.info("Configuration de défense écrite: %s (gamma=%.4f, mode=%s)",
                    path, self.gamma, self.mode.value)
        return path

    def to_state(self, mode: Optional[FlipMode] = None) -> DefenseState:
        return DefenseState(
            target=load_model(Path(self.target_path)),
            fq=load_model(Path(self.fq_path)),
            gamma=self.gamma,
            mode=FlipMode(mode) if mode is not None else self.mode,
            seed=self.seed,
        )
