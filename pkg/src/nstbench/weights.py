"""Weight containers and the NSTW1 binary weight file format.

In memory, weights are a plain dict: layer id -> {tensor name -> float32
ndarray}. Conv layers carry "weight" and, when the layer declares a bias,
"bias"; batchnorm layers carry "gamma", "beta", "mean", "var".

File format (little-endian throughout):

    magic   5 bytes  b"NSTW1"
    count   uint32   number of tensor entries
    entry:
        id_len   uint16            length of the utf-8 entry id
        id       id_len bytes      "<layer_id>/<tensor_name>"
        rank     uint8
        dims     rank * uint32
        payload  prod(dims) * float32

Entries appear in canonical order (topological layer order, tensor names
in the fixed per-kind order above), and a valid file covers every
weight-bearing layer of its target graph exactly once. Loading validates
magic, structural integrity, and exact agreement with the graph; every
failure names the offending entry.
"""

import struct
from typing import Dict

import numpy as np

from .errors import WeightFormatError
from .graphs import ArchGraph

MAGIC = b"NSTW1"

_BN_TENSORS = ("gamma", "beta", "mean", "var")

WeightDict = Dict[str, Dict[str, np.ndarray]]


def _kernel_pair(k):
    if isinstance(k, (tuple, list)):
        return int(k[0]), int(k[1])
    return int(k), int(k)


def tensor_layout(graph: ArchGraph):
    """Canonical (entry_id, shape) list for a graph's weight tensors."""
    layout = []
    for layer in graph.layers:
        p = layer.params
        if layer.kind == "conv":
            kh, kw = _kernel_pair(p["kernel"])
            layout.append((f"{layer.id}/weight", (p["out_channels"], p["in_channels"], kh, kw)))
            if p["bias"]:
                layout.append((f"{layer.id}/bias", (p["out_channels"],)))
        elif layer.kind == "batchnorm":
            for t in _BN_TENSORS:
                layout.append((f"{layer.id}/{t}", (p["channels"],)))
    return layout


def init_weights(graph: ArchGraph, seed: int) -> WeightDict:
    """He fan-in random conv weights, zero biases, identity batchnorm.

    Draw order follows the canonical layout, so a seed fully determines
    every tensor.
    """
    rng = np.random.default_rng(int(seed))
    weights: WeightDict = {}
    for layer in graph.layers:
        p = layer.params
        if layer.kind == "conv":
            kh, kw = _kernel_pair(p["kernel"])
            fan_in = p["in_channels"] * kh * kw
            std = np.sqrt(2.0 / fan_in)
            w = rng.normal(0.0, std, size=(p["out_channels"], p["in_channels"], kh, kw))
            entry = {"weight": w.astype(np.float32)}
            if p["bias"]:
                entry["bias"] = np.zeros(p["out_channels"], dtype=np.float32)
            weights[layer.id] = entry
        elif layer.kind == "batchnorm":
            c = p["channels"]
            weights[layer.id] = {
                "gamma": np.ones(c, dtype=np.float32),
                "beta": np.zeros(c, dtype=np.float32),
                "mean": np.zeros(c, dtype=np.float32),
                "var": np.ones(c, dtype=np.float32),
            }
    return weights


def _flatten(graph: ArchGraph, weights: WeightDict):
    for entry_id, shape in tensor_layout(graph):
        lid, tname = entry_id.rsplit("/", 1)
        layer_w = weights.get(lid)
        if layer_w is None or tname not in layer_w:
            raise WeightFormatError(f"weights missing tensor {entry_id}")
        arr = np.asarray(layer_w[tname], dtype=np.float32)
        if arr.shape != shape:
            raise WeightFormatError(
                f"tensor {entry_id} has shape {arr.shape}, graph expects {shape}"
            )
        yield entry_id, arr


def save_weights(path, graph: ArchGraph, weights: WeightDict):
    entries = list(_flatten(graph, weights))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(entries)))
        for entry_id, arr in entries:
            raw_id = entry_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_id)))
            fh.write(raw_id)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n, what):
        if self.off + n > len(self.blob):
            raise WeightFormatError(f"truncated weight file while reading {what}")
        chunk = self.blob[self.off : self.off + n]
        self.off += n
        return chunk


def read_weight_entries(path):
    """All (entry_id, float32 array) pairs from an NSTW1 file, in file order."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (count,) = struct.unpack("<I", r.take(4, "entry count"))
    entries = []
    for i in range(count):
        (id_len,) = struct.unpack("<H", r.take(2, f"entry {i} id length"))
        try:
            entry_id = r.take(id_len, f"entry {i} id").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightFormatError(f"entry {i} id is not valid utf-8") from exc
        (rank,) = struct.unpack("<B", r.take(1, f"{entry_id} rank"))
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, f"{entry_id} dims"))
        n = int(np.prod(dims)) if rank else 1
        payload = r.take(4 * n, f"{entry_id} payload")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        entries.append((entry_id, arr))
    if r.off != len(blob):
        raise WeightFormatError(f"{len(blob) - r.off} trailing bytes after last entry")
    return entries


def load_weights(path, graph: ArchGraph) -> WeightDict:
    entries = read_weight_entries(path)
    expected = dict(tensor_layout(graph))
    seen = set()
    weights: WeightDict = {}
    for entry_id, arr in entries:
        if entry_id not in expected:
            raise WeightFormatError(f"unexpected entry {entry_id!r} for graph {graph.name}")
        if entry_id in seen:
            raise WeightFormatError(f"duplicate entry {entry_id!r}")
        if arr.shape != expected[entry_id]:
            raise WeightFormatError(
                f"entry {entry_id} has shape {arr.shape}, graph expects {expected[entry_id]}"
            )
        seen.add(entry_id)
        lid, tname = entry_id.rsplit("/", 1)
        weights.setdefault(lid, {})[tname] = arr
    missing = sorted(set(expected) - seen)
    if missing:
        raise WeightFormatError(f"weight file missing entries: {missing[:5]}")
    return weights
