#!/usr/bin/env python3
"""Tests du format de poids PCNN et du sidecar JSON"""

import struct
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.models.network import build_network
from src.models.serialization import (
    decode_network, encode_network, load_metadata, load_model, save_model, sidecar_path,
)
from src.utils.errors import MissingArtifactError, ModelFormatError


class TestPcnnFormat:
    """Encodage / décodage binaire"""

    def test_exact_reload(self, tmp_path):
        net = build_network([784, 128, 64, 10], seed=5)
        path = save_model(net, tmp_path / "target.pcnn", {"seed": 5})
        loaded = load_model(path)
        assert loaded.arch == net.arch
        for a, b in zip(net.layers, loaded.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.bias, b.bias)
            assert a.activation is b.activation

    def test_sidecar(self, tmp_path):
        net = build_network([3, 4, 2], seed=0)
        path = save_model(net, tmp_path / "fq.pcnn", {"seed": 0})
        assert sidecar_path(path).exists()
        meta = load_metadata(path)
        assert meta["arch"] == [3, 4, 2]
        assert meta["seed"] == 0

    def test_bad_magic(self):
        data = bytearray(encode_network(build_network([3, 2], seed=0)))
        data[:4] = b"XXXX"
        with pytest.raises(ModelFormatError, match="bad magic"):
            decode_network(bytes(data))

    def test_truncated(self):
        data = encode_network(build_network([3, 4, 2], seed=0))
        with pytest.raises(ModelFormatError, match="truncated"):
            decode_network(data[:-8])
        with pytest.raises(ModelFormatError, match="truncated"):
            decode_network(data[:2])

    def test_dimension_header_mismatch(self):
        # deux couches 4x3 puis 2x5 : 5 != 4
        header = struct.pack("<4sII", b"PCNN", 1, 2)
        layer1 = struct.pack("<IIB", 4, 3, 0) + np.zeros(16, dtype="<f8").tobytes()
        layer2 = struct.pack("<IIB", 2, 5, 1) + np.zeros(12, dtype="<f8").tobytes()
        with pytest.raises(ModelFormatError, match="dimension header mismatch"):
            decode_network(header + layer1 + layer2)

    def test_trailing_bytes(self):
        data = encode_network(build_network([3, 2], seed=0)) + b"\x00" * 8
        with pytest.raises(ModelFormatError, match="dimension header mismatch"):
            decode_network(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_model(tmp_path / "absent.pcnn")


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
