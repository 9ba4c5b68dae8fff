"""Versioned binary model files.

Layout: magic "FSNT", little-endian u16 format version, a tagged
payload tree, and a trailing CRC-32 over everything before the trailer.
All numerics are stored as little-endian 64-bit values; integer arrays
ride as exact f64 (tree indices stay far below 2^53) and are cast back
on load. Dict keys are written sorted so identical models produce
identical bytes.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from ..errors import CorruptFileError, IoFailureError, VersionMismatchError
from ..features import PcaModel
from ..flowdata import FeatureSchema
from ..preprocess import StandardizationParams
from .base import EstimatorSpec, TrainedModel
from .bayes import GaussianNbEstimator
from .linear import LinearSvmEstimator, LogisticEstimator
from .neighbors import KnnEstimator
from .tree_models import AdaBoostEstimator, ForestEstimator, GbtEstimator, TreeEstimator

MAGIC = b"FSNT"
FORMAT_VERSION = 1

_TAG_NONE = 0
_TAG_BOOL = 1
_TAG_INT = 2
_TAG_FLOAT = 3
_TAG_STR = 4
_TAG_BYTES = 5
_TAG_LIST = 6
_TAG_DICT = 7
_TAG_ARRAY = 8

_ESTIMATOR_CLASSES = {
    "LR": LogisticEstimator,
    "NB": GaussianNbEstimator,
    "KNN": KnnEstimator,
    "DT": TreeEstimator,
    "RF": ForestEstimator,
    "ADABOOST": AdaBoostEstimator,
    "GBT": GbtEstimator,
    "SVM": LinearSvmEstimator,
}


def _encode_into(buf: bytearray, v) -> None:
    if v is None:
        buf.append(_TAG_NONE)
    elif isinstance(v, (bool, np.bool_)):
        buf.append(_TAG_BOOL)
        buf.append(1 if v else 0)
    elif isinstance(v, (int, np.integer)):
        buf.append(_TAG_INT)
        buf += struct.pack("<q", int(v))
    elif isinstance(v, (float, np.floating)):
        buf.append(_TAG_FLOAT)
        buf += struct.pack("<d", float(v))
    elif isinstance(v, str):
        raw = v.encode("utf-8")
        buf.append(_TAG_STR)
        buf += struct.pack("<I", len(raw))
        buf += raw
    elif isinstance(v, (bytes, bytearray)):
        buf.append(_TAG_BYTES)
        buf += struct.pack("<I", len(v))
        buf += bytes(v)
    elif isinstance(v, np.ndarray):
        a = np.ascontiguousarray(v, dtype="<f8")
        buf.append(_TAG_ARRAY)
        buf.append(a.ndim)
        for dim in a.shape:
            buf += struct.pack("<I", dim)
        buf += a.tobytes()
    elif isinstance(v, (list, tuple)):
        buf.append(_TAG_LIST)
        buf += struct.pack("<I", len(v))
        for item in v:
            _encode_into(buf, item)
    elif isinstance(v, dict):
        buf.append(_TAG_DICT)
        buf += struct.pack("<I", len(v))
        for key in sorted(v):
            _encode_into(buf, str(key))
            _encode_into(buf, v[key])
    else:
        raise TypeError(f"cannot serialize {type(v).__name__}")


def encode_value(v) -> bytes:
    buf = bytearray()
    _encode_into(buf, v)
    return bytes(buf)


class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.pos = offset

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise CorruptFileError("model file ends mid-record")
        chunk = self.data[self.pos: end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def value(self):
        tag = self.u8()
        if tag == _TAG_NONE:
            return None
        if tag == _TAG_BOOL:
            return self.u8() != 0
        if tag == _TAG_INT:
            return struct.unpack("<q", self.take(8))[0]
        if tag == _TAG_FLOAT:
            return struct.unpack("<d", self.take(8))[0]
        if tag == _TAG_STR:
            return self.take(self.u32()).decode("utf-8")
        if tag == _TAG_BYTES:
            return self.take(self.u32())
        if tag == _TAG_LIST:
            return [self.value() for _ in range(self.u32())]
        if tag == _TAG_DICT:
            return {self.value(): self.value() for _ in range(self.u32())}
        if tag == _TAG_ARRAY:
            ndim = self.u8()
            shape = tuple(self.u32() for _ in range(ndim))
            count = 1
            for dim in shape:
                count *= dim
            flat = np.frombuffer(self.take(8 * count), dtype="<f8")
            return flat.reshape(shape).astype(np.float64)
        raise CorruptFileError(f"unknown payload tag {tag}")


def _model_state(m: TrainedModel) -> dict:
    pca = None
    if m.pca is not None:
        pca = {
            "means": m.pca.means,
            "components": m.pca.components,
            "eigenvalues": m.pca.eigenvalues,
            "all_eigenvalues": m.pca.all_eigenvalues,
            "k": m.pca.k,
            "input_dim": m.pca.input_dim,
        }
    return {
        "kind": m.spec.kind,
        "hyperparameters": dict(m.spec.hyperparameters),
        "seed": m.spec.seed,
        "class_count": m.class_count,
        "input_features": list(m.input_schema.names),
        "standardizer": {"means": m.standardizer.means, "stds": m.standardizer.stds},
        "pca": pca,
        "estimator": m.estimator.to_state(),
        "fit_seconds": m.fit_seconds,
        "converged": m.converged,
        "training_log": [dict(entry) for entry in m.training_log],
        "model_id": m.model_id,
        "stored_accuracy": m.stored_accuracy,
        "stored_eval_seconds": m.stored_eval_seconds,
    }


def _model_from_state(state: dict) -> TrainedModel:
    try:
        schema = FeatureSchema(tuple(state["input_features"]))
        standardizer = StandardizationParams(
            means=np.asarray(state["standardizer"]["means"], dtype=np.float64).reshape(-1),
            stds=np.asarray(state["standardizer"]["stds"], dtype=np.float64).reshape(-1),
            schema=schema,
        )
        pca = None
        if state["pca"] is not None:
            p = state["pca"]
            pca = PcaModel(
                means=np.asarray(p["means"], dtype=np.float64).reshape(-1),
                components=np.asarray(p["components"], dtype=np.float64),
                eigenvalues=np.asarray(p["eigenvalues"], dtype=np.float64).reshape(-1),
                all_eigenvalues=np.asarray(p["all_eigenvalues"], dtype=np.float64).reshape(-1),
                k=int(p["k"]),
                input_dim=int(p["input_dim"]),
                input_schema=schema,
            )
        spec = EstimatorSpec(kind=state["kind"],
                             hyperparameters=state["hyperparameters"],
                             seed=int(state["seed"]))
        estimator = _ESTIMATOR_CLASSES[spec.kind].from_state(state["estimator"])
        return TrainedModel(
            spec=spec,
            class_count=int(state["class_count"]),
            input_schema=schema,
            standardizer=standardizer,
            pca=pca,
            estimator=estimator,
            fit_seconds=float(state["fit_seconds"]),
            training_log=tuple(state["training_log"]),
            converged=bool(state["converged"]),
            model_id=str(state["model_id"]),
            stored_accuracy=state["stored_accuracy"],
            stored_eval_seconds=state["stored_eval_seconds"],
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptFileError(f"model payload is malformed: {exc}") from exc


def save_model(m: TrainedModel, path) -> None:
    """Write the model atomically (temp file + rename)."""
    body = bytearray()
    body += MAGIC
    body += struct.pack("<H", FORMAT_VERSION)
    _encode_into(body, _model_state(m))
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(bytes(body))
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailureError(f"cannot write model file {path}: {exc}") from exc


def load_model(path) -> TrainedModel:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read model file {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 2 + 4 or data[: len(MAGIC)] != MAGIC:
        raise CorruptFileError("not a model file (bad magic)")
    version = struct.unpack("<H", data[4:6])[0]
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version} is not supported (expected {FORMAT_VERSION})")
    expected = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != expected:
        raise CorruptFileError("model file checksum mismatch")
    reader = _Reader(data, 6)
    state = reader.value()
    if reader.pos != len(data) - 4:
        raise CorruptFileError("model file has trailing garbage")
    if not isinstance(state, dict):
        raise CorruptFileError("model payload root is not a mapping")
    return _model_from_state(state)
