"""
Lecture des fichiers IDX (format MNIST).

Images : magic 0x00000803, puis (count, rows, cols) en u32 big-endian, puis les pixels u8.
Étiquettes : magic 0x00000801, puis count, puis les étiquettes u8.
Les fichiers .gz sont décompressés à la volée.
"""
import gzip
import logging
import struct
import sys
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.data.preprocessing import LabeledDataset
from src.utils.errors import IdxFormatError, MissingArtifactError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.exists():
        gz = path.with_name(path.name + ".gz")
        if gz.exists():
            path = gz
        else:
            raise MissingArtifactError(f"fichier IDX introuvable: {path}")
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def parse_idx_images(data: bytes, limit: Optional[int] = None) -> np.ndarray:
    if len(data) < 16:
        raise IdxFormatError("truncated: images header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"bad magic 0x{magic:08x} (expected 0x{IMAGES_MAGIC:08x})")
    if rows == 0 or cols == 0:
        raise IdxFormatError(f"dim mismatch: {rows}x{cols} images")
    n = count if limit is None else min(limit, count)
    needed = 16 + n * rows * cols
    if len(data) < needed:
        raise IdxFormatError(f"truncated: {len(data)} bytes, expected at least {needed}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes, limit: Optional[int] = None) -> np.ndarray:
    if len(data) < 8:
        raise IdxFormatError("truncated: labels header")
    magic, count = struct.unpack(">II", data[:8])
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"bad magic 0x{magic:08x} (expected 0x{LABELS_MAGIC:08x})")
    n = count if limit is None else min(limit, count)
    if len(data) < 8 + n:
        raise IdxFormatError(f"truncated: {len(data)} bytes, expected at least {8 + n}")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def _header_count(data: bytes) -> int:
    return struct.unpack(">I", data[4:8])[0] if len(data) >= 8 else -1


def load_idx(images_path: Path, labels_path: Path, limit: Optional[int] = None) -> LabeledDataset:
    """
    Charge un couple de fichiers IDX.

    Args:
        images_path: fichier d'images (idx3)
        labels_path: fichier d'étiquettes (idx1)
        limit: nombre maximal d'exemples (None = tous)

    Returns:
        LabeledDataset: pixels dans [0,1] (float64), min(limit, count) exemples
    """
    images_raw = _read_bytes(images_path)
    labels_raw = _read_bytes(labels_path)
    n_images, n_labels = _header_count(images_raw), _header_count(labels_raw)
    if n_images != n_labels:
        raise IdxFormatError(f"count mismatch: {n_images} images vs {n_labels} labels")
    X = parse_idx_images(images_raw, limit)
    y = parse_idx_labels(labels_raw, limit)
    logger.info("IDX chargé: %d exemples de dimension %d", X.shape[0], X.shape[1])
    return LabeledDataset(X, y)


def load_mnist(files: dict, train_limit: Optional[int], test_limit: Optional[int]
               ) -> Tuple[LabeledDataset, LabeledDataset]:
    train = load_idx(files["train_images"], files["train_labels"], train_limit)
    test = load_idx(files["test_images"], files["test_labels"], test_limit)
    return train, test
