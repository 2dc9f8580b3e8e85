"""Text serialization for networks.

Documents are JSON objects.  Floats are written with Python's shortest
round-trip repr, so ``loads(dumps(net))`` reproduces every weight bit for
bit.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import AffineLayer, FeedforwardNetwork
from .errors import NetworkFormatError

FORMAT_VERSION = 1
NETWORK_FIELDS = ("version", "input_dim", "layers", "metadata")
LAYER_FIELDS = ("rows", "cols", "weights", "bias", "activated")


def network_to_record(net: FeedforwardNetwork) -> dict:
    return {
        "version": FORMAT_VERSION,
        "input_dim": net.input_dim,
        "layers": [
            {
                "rows": layer.out_dim,
                "cols": layer.in_dim,
                "weights": [float(v) for v in layer.weight.ravel()],
                "bias": [float(v) for v in layer.bias],
                "activated": layer.activated,
            }
            for layer in net.layers
        ],
        "metadata": dict(net.metadata),
    }


def serialize_network(net: FeedforwardNetwork) -> bytes:
    return dumps_record(network_to_record(net)).encode("utf-8")


def dumps_record(record) -> str:
    return json.dumps(record, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _require(obj, name, where):
    if not isinstance(obj, dict):
        raise NetworkFormatError(f"{where}: expected an object")
    if name not in obj:
        raise NetworkFormatError(f"{where}: missing field '{name}'")
    return obj[name]


def record_to_network(rec, where="network") -> FeedforwardNetwork:
    for name in NETWORK_FIELDS:
        _require(rec, name, where)
    if rec["version"] != FORMAT_VERSION:
        raise NetworkFormatError(f"{where}: unsupported version {rec['version']!r}")
    layers = []
    for i, lr in enumerate(rec["layers"]):
        at = f"{where}.layers[{i}]"
        for name in LAYER_FIELDS:
            _require(lr, name, at)
        rows, cols = lr["rows"], lr["cols"]
        weights, bias = lr["weights"], lr["bias"]
        if len(weights) != rows * cols:
            raise NetworkFormatError(f"{at}.weights: expected {rows * cols} values, found {len(weights)}")
        if len(bias) != rows:
            raise NetworkFormatError(f"{at}.bias: expected {rows} values, found {len(bias)}")
        try:
            w = np.array(weights, dtype=float).reshape(rows, cols)
            layers.append(AffineLayer(w, np.array(bias, dtype=float), bool(lr["activated"])))
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{at}: {exc}") from exc
    try:
        return FeedforwardNetwork(int(rec["input_dim"]), tuple(layers), rec["metadata"])
    except (TypeError, ValueError) as exc:
        raise NetworkFormatError(f"{where}: {exc}") from exc


def parse_document(data, required=NETWORK_FIELDS) -> dict:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        missing = [f for f in required if f'"{f}"' not in text]
        hint = f"; missing field '{missing[0]}'" if missing else ""
        raise NetworkFormatError(
            f"malformed document at line {exc.lineno}, column {exc.colno}: {exc.msg}{hint}") from exc


def deserialize_network(data) -> FeedforwardNetwork:
    return record_to_network(parse_document(data))


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save_network(net: FeedforwardNetwork, path) -> Path:
    return atomic_write(path, serialize_network(net))


def load_network(path) -> FeedforwardNetwork:
    return deserialize_network(Path(path).read_bytes())
