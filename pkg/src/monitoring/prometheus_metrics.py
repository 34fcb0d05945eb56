"""
═══════════════════════════════════════════════════════════════════════════════
🎯 PROMETHEUS METRICS - Métriques des campagnes d'attaque
═══════════════════════════════════════════════════════════════════════════════

📚 OBJECTIF
Les campagnes sont des traitements batch : pas de serveur /metrics à scraper.
Les métriques vivent dans un registre dédié et sont écrites à la fin de la
campagne au format texte Prometheus (textfile collector de node_exporter).

🔑 MÉTRIQUES
- predcoin_attack_runs_total{attack,arm,success} : Counter
- predcoin_attack_queries{attack,arm} : Histogram des requêtes consommées
- predcoin_detector_flags_total{mode} : Counter des requêtes signalées par F_Q
- predcoin_campaign_duration_seconds : Gauge, durée de la dernière campagne

🔗 INTÉGRATION
- Appelé par : src/evaluation/campaign.py
- Activé par : ENABLE_PROMETHEUS=true (config/settings.py)

═══════════════════════════════════════════════════════════════════════════════
"""
import logging
import sys
from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from config.settings import ENABLE_PROMETHEUS

logger = logging.getLogger(__name__)

# Registre propre au projet (pas les métriques process/python par défaut)
REGISTRY = CollectorRegistry()

# ─────────────────────────────────────────────────────────────────────────────
# 📊 COUNTER : exécutions d'attaque
# ─────────────────────────────────────────────────────────────────────────────
attack_runs_total = Counter(
    'predcoin_attack_runs_total',
    'Number of attack runs',
    ['attack', 'arm', 'success'],
    registry=REGISTRY,
)
# 💡 LABELS
# - arm : 'base' (non défendu) ou 'defended'
# - success : 'true', 'false'

# ─────────────────────────────────────────────────────────────────────────────
# 📊 HISTOGRAM : requêtes consommées par exécution
# ─────────────────────────────────────────────────────────────────────────────
attack_queries = Histogram(
    'predcoin_attack_queries',
    'Queries consumed by one attack run',
    ['attack', 'arm'],
    buckets=[100, 500, 1000, 2000, 5000, 10_000, 30_000, 50_000],
    registry=REGISTRY,
)

detector_flags_total = Counter(
    'predcoin_detector_flags_total',
    'Queries flagged by the detector',
    ['mode'],
    registry=REGISTRY,
)

campaign_duration = Gauge(
    'predcoin_campaign_duration_seconds',
    'Wall time of the last campaign',
    registry=REGISTRY,
)


# ═══════════════════════════════════════════════════════════════════════════
# 📝 HELPERS - ne lèvent jamais d'exception
# ═══════════════════════════════════════════════════════════════════════════

def track_attack_run(attack: str, arm: str, success: bool, queries: int) -> None:
    try:
        attack_runs_total.labels(attack=attack, arm=arm, success=str(success).lower()).inc()
        attack_queries.labels(attack=attack, arm=arm).observe(queries)
    except Exception as e:
        logger.warning("⚠️ Métrique d'attaque non enregistrée: %s", e)


def track_flags(mode: str, count: int) -> None:
    try:
        if count > 0:
            detector_flags_total.labels(mode=mode).inc(count)
    except Exception as e:
        logger.warning("⚠️ Métrique de détection non enregistrée: %s", e)


def track_campaign_duration(seconds: float) -> None:
    try:
        campaign_duration.set(seconds)
    except Exception as e:
        logger.warning("⚠️ Durée de campagne non enregistrée: %s", e)


def write_metrics(path: Path, enabled: bool = ENABLE_PROMETHEUS) -> bool:
    """
    Écrit le registre au format texte Prometheus.

    Returns:
        True si le fichier a été écrit
    """
    if not enabled:
        logger.debug("ℹ️ Prometheus désactivé, métriques non écrites")
        return False
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), REGISTRY)
        logger.info("✅ Métriques Prometheus écrites: %s", path)
        return True
    except Exception as e:
        logger.warning("⚠️ Écriture des métriques impossible: %s", e)
        return False
