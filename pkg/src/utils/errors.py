"""
Hiérarchie d'exceptions du projet.

Toutes les erreurs levées par la bibliothèque dérivent de PredCoinError,
ce qui permet à la CLI de les intercepter en un seul endroit.
"""
from typing import Optional

import numpy as np


class PredCoinError(Exception):
    """Erreur de base du projet"""


class ConfigError(PredCoinError):
    """Configuration invalide (plage de valeurs, nom inconnu, ...)"""


class DimensionMismatchError(PredCoinError):
    """Dimension d'entrée incompatible avec le réseau ou l'oracle"""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"dimension mismatch: expected {expected}, got {actual}")


class ModelFormatError(PredCoinError):
    """Fichier de poids PCNN illisible"""


class IdxFormatError(PredCoinError):
    """Fichier IDX (MNIST) illisible"""


class EmptyDatasetError(PredCoinError):
    """Jeu de données vide"""


class LabelRangeError(PredCoinError):
    """Étiquette hors de [0, m)"""


class UnsupportedOperationError(PredCoinError):
    """Opération non disponible pour ce type d'objet"""


class NotAdversarialError(PredCoinError):
    """Le point fourni n'est pas adversarial"""


class DegenerateDataError(PredCoinError):
    """Données dégénérées (une seule classe, aucun tirage exploitable, ...)"""


class MissingArtifactError(PredCoinError):
    """Fichier de modèle ou de configuration introuvable"""


class BudgetExhaustedError(PredCoinError):
    """
    Budget de requêtes épuisé en cours d'estimation.

    Transporte le nombre de requêtes consommées et l'estimation partielle
    (somme non normalisée des directions pondérées), si disponible.
    """

    def __init__(self, queries_spent: int, partial: Optional[np.ndarray] = None):
        self.queries_spent = queries_spent
        self.partial = partial
        super().__init__(f"query budget exhausted after {queries_spent} queries")
