#!/usr/bin/env python3
"""Script d'entraînement de la cible puis du détecteur F_Q (chaîne complète)"""

import sys
from pathlib import Path

# Ajouter le répertoire racine au path
ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from config.settings import MODELS_DIR
from src.cli import main as cli_main


def main():
    extra = sys.argv[1:]
    out = str(MODELS_DIR)
    print("Début de l'entraînement de la cible")
    if cli_main(["train-target", "--out", out, *extra]) != 0:
        return 1
    print("Génération du jeu F_Q")
    if cli_main(["gen-fq-data", "--target", f"{out}/target.pcnn", "--out", out, *extra]) != 0:
        return 1
    print("Entraînement de F_Q")
    if cli_main(["train-fq", "--fq-data", f"{out}/fq_data.npz", "--out", out]) != 0:
        return 1
    print("Recherche de gamma")
    code = cli_main(["gamma-search", "--target", f"{out}/target.pcnn", "--fq", f"{out}/fq.pcnn",
                     "--out", out, *extra])
    if code == 0:
        print("Entraînement terminé avec succès!")
    return code


if __name__ == "__main__":
    sys.exit(main())
