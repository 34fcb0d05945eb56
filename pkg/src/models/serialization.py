"""
Format de poids binaire "PCNN" + sidecar JSON.

Disposition :
    b"PCNN" | u32 version (=1) | u32 nb_couches
    puis par couche : u32 rows | u32 cols | u8 tag (0=relu, 1=softmax, 2=identity)
                      rows*cols float64 LE (ligne par ligne) | rows float64 LE (biais)
Le sidecar `<fichier>.json` contient l'architecture, la graine et la config d'entraînement.
"""
import json
import logging
import struct
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.models.network import ACTIVATION_TAGS, TAG_ACTIVATIONS, DenseLayer, DenseNetwork
from src.utils.errors import ConfigError, MissingArtifactError, ModelFormatError

logger = logging.getLogger(__name__)

MAGIC = b"PCNN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII")
_LAYER_HEADER = struct.Struct("<IIB")
_FLOAT = np.dtype("<f8")


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def encode_network(net: DenseNetwork) -> bytes:
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(net.layers))]
    for layer in net.layers:
        rows, cols = layer.weights.shape
        chunks.append(_LAYER_HEADER.pack(rows, cols, ACTIVATION_TAGS[layer.activation]))
        chunks.append(np.ascontiguousarray(layer.weights, dtype=_FLOAT).tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype=_FLOAT).tobytes())
    return b"".join(chunks)


def decode_network(data: bytes) -> DenseNetwork:
    if len(data) < len(MAGIC):
        raise ModelFormatError("truncated: file shorter than magic")
    if data[:4] != MAGIC:
        raise ModelFormatError("bad magic")
    if len(data) < _HEADER.size:
        raise ModelFormatError("truncated: incomplete header")
    _, version, n_layers = _HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if n_layers == 0:
        raise ModelFormatError("dimension header mismatch: zero layers")

    offset = _HEADER.size
    layers = []
    prev_rows = None
    for i in range(n_layers):
        if len(data) < offset + _LAYER_HEADER.size:
            raise ModelFormatError(f"truncated: layer {i} header")
        rows, cols, tag = _LAYER_HEADER.unpack_from(data, offset)
        offset += _LAYER_HEADER.size
        if rows == 0 or cols == 0 or (prev_rows is not None and cols != prev_rows):
            raise ModelFormatError(
                f"dimension header mismatch: layer {i} is {rows}x{cols} after {prev_rows} outputs"
            )
        if tag not in TAG_ACTIVATIONS:
            raise ModelFormatError(f"unknown activation tag {tag} in layer {i}")
        n_bytes = (rows * cols + rows) * _FLOAT.itemsize
        if len(data) < offset + n_bytes:
            raise ModelFormatError(f"truncated: layer {i} parameters")
        values = np.frombuffer(data, dtype=_FLOAT, count=rows * cols + rows, offset=offset)
        offset += n_bytes
        weights = values[: rows * cols].reshape(rows, cols).astype(np.float64)
        bias = values[rows * cols:].astype(np.float64)
        layers.append(DenseLayer(weights, bias, TAG_ACTIVATIONS[tag]))
        prev_rows = rows
    if offset != len(data):
        raise ModelFormatError(
            f"dimension header mismatch: {len(data) - offset} trailing bytes"
        )
    try:
        return DenseNetwork(layers)
    except ConfigError as e:
        raise ModelFormatError(f"dimension header mismatch: {e}") from e


def save_model(net: DenseNetwork, path: Path, metadata: Optional[Dict[str, Any]] = None) -> Path:
    """Écrit les poids au format PCNN et le sidecar JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_network(net))
    sidecar = {"arch": net.arch, "format_version": FORMAT_VERSION}
    sidecar.update(metadata or {})
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    logger.info("Modèle sauvegardé: %s (arch=%s)", path, net.arch)
    return path


def load_model(path: Path) -> DenseNetwork:
    """Charge un réseau PCNN"""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"modèle introuvable: {path}")
    net = decode_network(path.read_bytes())
    logger.debug("Modèle chargé: %s", path)
    return net


def load_metadata(path: Path) -> Dict[str, Any]:
    """Lit le sidecar JSON (dictionnaire vide s'il est absent)"""
    meta = sidecar_path(path)
    if not meta.exists():
        return {}
    return json.loads(meta.read_text())
