"""
Tests pour les métriques Prometheus des campagnes
"""
import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))
from src.monitoring import prometheus_metrics as metrics


def sample(name, labels=None):
    value = metrics.REGISTRY.get_sample_value(name, labels or {})
    return 0.0 if value is None else value


class TestPrometheusMetrics:
    """Tests du registre dédié"""

    def test_attack_run_increments_counter(self):
        """Une exécution incrémente le compteur et l'histogramme"""
        labels = {'attack': 'hsja', 'arm': 'base', 'success': 'true'}
        before = sample('predcoin_attack_runs_total', labels)
        metrics.track_attack_run('hsja', 'base', True, 420)
        assert sample('predcoin_attack_runs_total', labels) == before + 1
        assert sample('predcoin_attack_queries_count', {'attack': 'hsja', 'arm': 'base'}) >= 1

    def test_flags_counter(self):
        """Les requêtes signalées s'accumulent par mode"""
        before = sample('predcoin_detector_flags_total', {'mode': 'parity'})
        metrics.track_flags('parity', 7)
        metrics.track_flags('parity', 0)
        assert sample('predcoin_detector_flags_total', {'mode': 'parity'}) == before + 7

    def test_campaign_duration(self):
        metrics.track_campaign_duration(12.5)
        assert sample('predcoin_campaign_duration_seconds') == 12.5

    def test_helpers_never_raise(self):
        """Un label invalide est journalisé, pas propagé"""
        metrics.track_flags(None, -1)

    def test_write_metrics(self, tmp_path):
        """Format texte lisible par le textfile collector"""
        metrics.track_attack_run('sfa', 'defended', False, 10)
        path = tmp_path / "metrics.prom"
        assert metrics.write_metrics(path, enabled=True)
        content = path.read_text()
        assert 'predcoin_attack_runs_total' in content
        assert 'predcoin_campaign_duration_seconds' in content

    def test_disabled(self, tmp_path):
        assert not metrics.write_metrics(tmp_path / "metrics.prom", enabled=False)
        assert not (tmp_path / "metrics.prom").exists()


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
