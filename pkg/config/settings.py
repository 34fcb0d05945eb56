import os
from pathlib import Path
from dotenv import load_dotenv

# Chargement du fichier .env
load_dotenv()

# Chemins de base
ROOT_DIR = Path(__file__).parent.parent
SRC_DIR = ROOT_DIR / "src"
DATA_DIR = ROOT_DIR / "data"
CONFIG_DIR = ROOT_DIR / "config"

# Données
RAW_DATA_DIR = DATA_DIR / "raw"
PROCESSED_DATA_DIR = DATA_DIR / "processed"
REPORTS_DIR = Path(os.environ.get("REPORTS_DIR", DATA_DIR / "reports"))

# MNIST (fichiers IDX, éventuellement gzippés)
MNIST_DIR = Path(os.environ.get("MNIST_DIR", RAW_DATA_DIR / "mnist"))
MNIST_FILES = {
    "train_images": MNIST_DIR / "train-images-idx3-ubyte",
    "train_labels": MNIST_DIR / "train-labels-idx1-ubyte",
    "test_images": MNIST_DIR / "t10k-images-idx3-ubyte",
    "test_labels": MNIST_DIR / "t10k-labels-idx1-ubyte",
}

# Modèles
MODELS_DIR = PROCESSED_DATA_DIR / "models"

# Configuration de l'entraînement (SGD + momentum)
TRAIN_CONFIG = {
    "learning_rate": 0.01,
    "momentum": 0.9,
    "batch_size": 128,
    "epochs": 50,
    "seed": 1337,
}

# Architectures
TARGET_ARCH = [784, 128, 64, 10]
DETECTOR_ARCH = [3, 64, 64, 32, 2]

# Attaques
ATTACK_CONFIG = {
    "norm": "l2",
    "query_budget": 2000,
    "B0": 100,
    "B_max": 10_000,
    "init_draws": 200,
}

# Défense
DEFENSE_CONFIG = {
    "gamma": 0.5,
    "mode": "probabilistic",
    "acc_loss_cap": 0.1,
    "gamma_tol": 0.01,
    "eval_seed": 2024,
}

# Attaques adaptatives
ADAPTIVE_CONFIG = {
    "bypass_grid": 50,
    "bypass_refine": 20,
    # delta_max = ratio × ‖x_t − x*‖₂
    "bypass_delta_max_ratio": 0.5,
    "k": 5,
    "vote": "majority",
}

# Campagnes (échelle "bureau")
EXPERIMENT_CONFIG = {
    "train_limit": 5000,
    "test_limit": 1000,
    "n_seed_images": 50,
    "budgets": [500, 2000],
    "full_budgets": [30_000, 50_000],
    "timing_batch": 256,
    "timing_reps": 5,
}

# Exécution
N_WORKERS = int(os.getenv("N_WORKERS", "1"))
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
ENABLE_PROMETHEUS = os.getenv("ENABLE_PROMETHEUS", "false").lower() == "true"
