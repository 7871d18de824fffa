"""Versioned binary encoding of fitted forests.

Layout::

    b"SLPF"  | uint16 version | uint32 header length | JSON header | array bytes

The header names every array with its dtype and shape; array payloads follow
in header order, little-endian. Floats are stored bit-exactly, so a decoded
model predicts exactly like the original.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .mforest import MFParams, MondrianForestModel, MondrianNode, MondrianTree
from .rforest import DecisionTree, RandomForestModel, RFParams

MAGIC = b"SLPF"
VERSION = 1


class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


def _pack(kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    entries, payload = [], []
    for name, a in arrays.items():
        a = np.ascontiguousarray(a)
        le = a.dtype.newbyteorder("<")
        entries.append({"name": name, "dtype": le.str, "shape": list(a.shape)})
        payload.append(a.astype(le, copy=False).tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "arrays": entries}, sort_keys=True).encode()
    return MAGIC + struct.pack("<HI", VERSION, len(header)) + header + b"".join(payload)


def _unpack(blob: bytes) -> tuple[str, dict, dict[str, np.ndarray]]:
    if blob[:4] != MAGIC:
        raise ModelFormatError("not a serialized forest (bad magic)")
    version, hlen = struct.unpack_from("<HI", blob, 4)
    if version != VERSION:
        raise ModelVersionError(f"unsupported model version {version} (expected {VERSION})")
    start = 10
    header = json.loads(blob[start : start + hlen])
    pos = start + hlen
    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        a = np.frombuffer(blob, dtype=dtype, count=count, offset=pos).reshape(entry["shape"])
        arrays[entry["name"]] = a.astype(dtype.newbyteorder("="))
        pos += count * dtype.itemsize
    if pos != len(blob):
        raise ModelFormatError(f"{len(blob) - pos} trailing bytes")
    return header["kind"], header["meta"], arrays


def _concat(parts, dtype, width=None):
    if parts:
        return np.concatenate(parts).astype(dtype)
    return np.zeros((0,) if width is None else (0, width), dtype=dtype)


def _split(a: np.ndarray, sizes: np.ndarray) -> list[np.ndarray]:
    return np.split(a, np.cumsum(sizes)[:-1])


def _rf_encode(model: RandomForestModel) -> bytes:
    trees = model.trees
    arrays = {
        "tree_sizes": np.array([t.n_nodes for t in trees], dtype=np.int64),
        "feature": _concat([t.feature for t in trees], np.int64),
        "threshold": _concat([t.threshold for t in trees], np.float64),
        "left": _concat([t.left for t in trees], np.int64),
        "right": _concat([t.right for t in trees], np.int64),
        "counts": _concat([t.counts for t in trees], np.float64, 2),
    }
    meta = {"params": dataclasses.asdict(model.params), "n_features": model.n_features}
    return _pack("rf", meta, arrays)


def _rf_decode(meta: dict, arrays: dict) -> RandomForestModel:
    sizes = arrays["tree_sizes"]
    parts = {k: _split(arrays[k], sizes) for k in ("feature", "threshold", "left", "right", "counts")}
    trees = [
        DecisionTree(*(parts[k][i] for k in ("feature", "threshold", "left", "right", "counts")))
        for i in range(len(sizes))
    ]
    return RandomForestModel(RFParams(**meta["params"]), meta["n_features"], trees)


def _mf_encode(model: MondrianForestModel) -> bytes:
    cols = {k: [] for k in ("tau", "lo", "hi", "split_dim", "split_loc", "left", "right", "counts")}
    sizes, row_sizes, rows, rng_states = [], [], [], []
    for tree in model.trees:
        flat = tree.flat()
        for k in cols:
            cols[k].append(getattr(flat, k))
        nodes = list(tree.root.walk())
        sizes.append(len(nodes))
        for node in nodes:
            row_sizes.append(0 if node.rows is None else len(node.rows))
            if node.rows is not None:
                rows.append(node.rows)
        rng_states.append(tree.rng.bit_generator.state)
    d = model.n_features
    arrays = {
        "tree_sizes": np.array(sizes, dtype=np.int64),
        "tau": _concat(cols["tau"], np.float64),
        "lo": _concat(cols["lo"], np.float64, d),
        "hi": _concat(cols["hi"], np.float64, d),
        "split_dim": _concat(cols["split_dim"], np.int64),
        "split_loc": _concat(cols["split_loc"], np.float64),
        "left": _concat(cols["left"], np.int64),
        "right": _concat(cols["right"], np.int64),
        "counts": _concat(cols["counts"], np.float64, 2),
        "row_sizes": np.array(row_sizes, dtype=np.int64),
        "rows": _concat(rows, np.int64),
        "data_X": model.data_X.astype(np.float64),
        "data_y": model.data_y.astype(np.int64),
    }
    meta = {
        "params": dataclasses.asdict(model.params),
        "n_features": d,
        "rng_states": rng_states,
    }
    return _pack("mf", meta, arrays)


def _mf_decode(meta: dict, arrays: dict) -> MondrianForestModel:
    params = MFParams(**meta["params"])
    model = MondrianForestModel(params, meta["n_features"], arrays["data_X"], arrays["data_y"])
    sizes = arrays["tree_sizes"]
    node_cols = ("tau", "lo", "hi", "split_dim", "split_loc", "left", "right", "counts")
    parts = {k: _split(arrays[k], sizes) for k in node_cols + ("row_sizes",)}
    leaf_rows = _split(arrays["rows"], arrays["row_sizes"][arrays["row_sizes"] > 0])
    leaf_iter = iter(leaf_rows)
    for i, state in enumerate(meta["rng_states"]):
        p = {k: parts[k][i] for k in parts}
        nodes = []
        for j in range(len(p["tau"])):
            rows = next(leaf_iter) if p["row_sizes"][j] > 0 else None
            node = MondrianNode(float(p["tau"][j]), p["lo"][j].copy(), p["hi"][j].copy(), p["counts"][j].copy(), rows)
            node.split_dim = int(p["split_dim"][j])
            node.split_loc = float(p["split_loc"][j])
            nodes.append(node)
        for j, node in enumerate(nodes):
            if p["left"][j] >= 0:
                node.left = nodes[p["left"][j]]
                node.right = nodes[p["right"][j]]
        rng = np.random.Generator(np.random.PCG64(0))
        rng.bit_generator.state = state
        model.trees.append(MondrianTree(nodes[0], rng))
    return model


def serialize_model(model) -> bytes:
    if isinstance(model, RandomForestModel):
        return _rf_encode(model)
    if isinstance(model, MondrianForestModel):
        return _mf_encode(model)
    raise TypeError(f"cannot serialize {type(model).__name__}")


def deserialize_model(blob: bytes):
    kind, meta, arrays = _unpack(blob)
    if kind == "rf":
        return _rf_decode(meta, arrays)
    if kind == "mf":
        return _mf_decode(meta, arrays)
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model, path):
    Path(path).write_bytes(serialize_model(model))


def load_model(path):
    return deserialize_model(Path(path).read_bytes())
