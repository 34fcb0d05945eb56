#!/usr/bin/env python3
"""Tests du lecteur IDX sur des fichiers synthétiques"""

import gzip
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from config.settings import EXPERIMENT_CONFIG, MNIST_FILES
from src.data.idx_loader import load_idx, load_mnist
from src.utils.errors import IdxFormatError, MissingArtifactError
from conftest import requires_mnist


def write_idx(tmp_path, n_images=5, n_labels=5, rows=4, cols=4, image_magic=0x803,
              label_magic=0x801, gz=False, cut=0):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=n_images * rows * cols, dtype=np.uint8)
    pixels[0] = 255
    labels = rng.integers(0, 10, size=n_labels, dtype=np.uint8)
    images = struct.pack(">IIII", image_magic, n_images, rows, cols) + pixels.tobytes()
    images = images[:len(images) - cut]
    label_bytes = struct.pack(">II", label_magic, n_labels) + labels.tobytes()
    img_path, lbl_path = tmp_path / "images-idx3-ubyte", tmp_path / "labels-idx1-ubyte"
    if gz:
        img_path, lbl_path = img_path.with_suffix(".gz"), lbl_path.with_suffix(".gz")
        img_path.write_bytes(gzip.compress(images))
        lbl_path.write_bytes(gzip.compress(label_bytes))
    else:
        img_path.write_bytes(images)
        lbl_path.write_bytes(label_bytes)
    return img_path, lbl_path, labels


class TestIdxLoader:
    """Contrat du format IDX"""

    def test_load_and_scale(self, tmp_path):
        images, labels, expected = write_idx(tmp_path)
        data = load_idx(images, labels)
        assert data.X.shape == (5, 16)
        assert data.X.dtype == np.float64
        assert data.X[0, 0] == 1.0
        assert data.X.min() >= 0.0 and data.X.max() <= 1.0
        np.testing.assert_array_equal(data.y, expected)

    def test_limit(self, tmp_path):
        images, labels, _ = write_idx(tmp_path)
        assert len(load_idx(images, labels, limit=3)) == 3
        assert len(load_idx(images, labels, limit=100)) == 5

    def test_gzip(self, tmp_path):
        images, labels, _ = write_idx(tmp_path, gz=True)
        assert len(load_idx(images, labels)) == 5

    def test_bad_magic(self, tmp_path):
        images, labels, _ = write_idx(tmp_path, image_magic=0x801)
        with pytest.raises(IdxFormatError, match="bad magic"):
            load_idx(images, labels)

    def test_count_mismatch(self, tmp_path):
        images, labels, _ = write_idx(tmp_path, n_labels=4)
        with pytest.raises(IdxFormatError, match="count mismatch"):
            load_idx(images, labels)

    def test_truncated(self, tmp_path):
        images, labels, _ = write_idx(tmp_path, cut=3)
        with pytest.raises(IdxFormatError, match="truncated"):
            load_idx(images, labels)

    def test_missing(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_idx(tmp_path / "nope", tmp_path / "nope2")


@pytest.mark.mnist
@requires_mnist
def test_real_mnist_subset():
    train, test = load_mnist(MNIST_FILES, 100, EXPERIMENT_CONFIG["test_limit"])
    assert train.X.shape == (100, 784)
    assert train.y.min() >= 0 and train.y.max() < 10


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
