"""Declarative architecture graphs.

A graph is a topologically ordered list of LayerSpec nodes over seven
layer kinds (conv, relu, maxpool, avgpool, batchnorm, add, concat). The
special id "input" refers to the image. Classification heads never appear;
graphs end at their deepest feature layer.

Tap registries map small ordinals ("layer 1" .. "layer 10" in the full
backbones) to layer ids, with per-architecture content/style defaults.

forward_with_taps runs the graph and keeps a tape so that a scalar loss
seeded at tapped activations can be pulled back to an image gradient. The
image is the only differentiable quantity anywhere in the suite.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import ops
from .errors import ConfigurationError
from .ops import FeatureMap

LAYER_KINDS = ("conv", "relu", "maxpool", "avgpool", "batchnorm", "add", "concat")

_PARAM_KEYS = {
    "conv": {"in_channels", "out_channels", "kernel", "stride", "pad", "bias"},
    "relu": set(),
    "maxpool": {"window", "stride", "pad"},
    "avgpool": {"window", "stride", "pad"},
    "batchnorm": {"channels", "eps"},
    "add": set(),
    "concat": set(),
}


@dataclass(frozen=True)
class LayerSpec:
    id: str
    kind: str
    inputs: Tuple[str, ...]
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TapRegistry:
    ordinals: Dict[int, str]
    content_default: int
    style_defaults: Tuple[int, ...]

    def layer_id(self, ordinal: int) -> str:
        if ordinal not in self.ordinals:
            avail = sorted(self.ordinals)
            raise ConfigurationError(f"unknown tap ordinal {ordinal}; available: {avail}")
        return self.ordinals[ordinal]

    @property
    def deepest_style_default(self) -> int:
        return max(self.style_defaults)


@dataclass
class ArchGraph:
    name: str
    layers: List[LayerSpec]
    taps: TapRegistry
    input_channels: int = 3
    min_input: int = 64

    def __post_init__(self):
        self._by_id = {}
        seen = {"input"}
        for layer in self.layers:
            if layer.kind not in LAYER_KINDS:
                raise ConfigurationError(f"layer {layer.id}: unknown kind {layer.kind!r}")
            if layer.id in seen:
                raise ConfigurationError(f"duplicate layer id {layer.id!r}")
            extra = set(layer.params) - _PARAM_KEYS[layer.kind]
            if extra:
                raise ConfigurationError(f"layer {layer.id}: unexpected params {sorted(extra)}")
            if not layer.inputs:
                raise ConfigurationError(f"layer {layer.id}: no inputs")
            for src in layer.inputs:
                if src not in seen:
                    raise ConfigurationError(
                        f"layer {layer.id}: input {src!r} not defined earlier (graph must be topological)"
                    )
            if layer.kind == "add" and len(layer.inputs) != 2:
                raise ConfigurationError(f"add layer {layer.id} needs exactly 2 inputs")
            if layer.kind == "concat" and len(layer.inputs) < 2:
                raise ConfigurationError(f"concat layer {layer.id} needs at least 2 inputs")
            seen.add(layer.id)
            self._by_id[layer.id] = layer
        # tap ordinals must resolve and must be strictly deeper with rank
        depth = {layer.id: i for i, layer in enumerate(self.layers)}
        last = -1
        for ordinal in sorted(self.taps.ordinals):
            lid = self.taps.ordinals[ordinal]
            if lid not in depth:
                raise ConfigurationError(f"tap {ordinal} points at unknown layer {lid!r}")
            if depth[lid] <= last:
                raise ConfigurationError(f"tap {ordinal} is not deeper than the previous tap")
            last = depth[lid]
        if not self.taps.style_defaults:
            raise ConfigurationError("style default taps must not be empty")
        defaults = [("content", self.taps.content_default)]
        defaults += [("style", d) for d in self.taps.style_defaults]
        for name, d in defaults:
            if d not in self.taps.ordinals:
                raise ConfigurationError(f"{name} default tap {d} missing from registry")

    def layer(self, layer_id: str) -> LayerSpec:
        return self._by_id[layer_id]

    def conv_like_layers(self):
        """Layers that carry weight tensors, in topological order."""
        return [l for l in self.layers if l.kind in ("conv", "batchnorm")]


class Tape:
    """Saved forward state: every layer output plus pool winner indices."""

    def __init__(self, graph: ArchGraph, weights, outputs, pool_idx):
        self.graph = graph
        self.weights = weights
        self.outputs = outputs
        self.pool_idx = pool_idx

    def kink_signature(self):
        """Piecewise-region fingerprint: relu sign masks and pool winners."""
        sig = []
        for layer in self.graph.layers:
            if layer.kind == "relu":
                sig.append(self.outputs[layer.inputs[0]] > 0)
            elif layer.kind == "maxpool":
                sig.append(self.pool_idx[layer.id])
        return tuple(sig)

    def backward(self, tap_grads: Dict[int, np.ndarray]) -> np.ndarray:
        """Pull gradients seeded at tap ordinals back to the input image."""
        graph = self.graph
        gbuf: Dict[str, np.ndarray] = {}

        def _accumulate(lid, g):
            if lid in gbuf:
                gbuf[lid] = gbuf[lid] + g
            else:
                gbuf[lid] = g

        for ordinal, g in tap_grads.items():
            lid = graph.taps.layer_id(int(ordinal))
            out = self.outputs[lid]
            g = np.asarray(g, dtype=out.dtype)
            assert g.shape == out.shape, (
                f"tap {ordinal} gradient shape {g.shape} != activation shape {out.shape}"
            )
            _accumulate(lid, g)

        image = self.outputs["input"]
        image_grad = np.zeros_like(image)
        for layer in reversed(graph.layers):
            g = gbuf.pop(layer.id, None)
            if g is None:
                continue
            src_grads = self._layer_backward(layer, g)
            for src, gsrc in src_grads:
                if src == "input":
                    image_grad += gsrc
                else:
                    _accumulate(src, gsrc)
        return image_grad

    def _layer_backward(self, layer: LayerSpec, g):
        p = layer.params
        src = layer.inputs[0]
        x = self.outputs[src]
        if layer.kind == "conv":
            w = self.weights[layer.id]["weight"]
            gx = ops.conv2d_backward(g, w, p["stride"], p["pad"], x.shape[1:])
            return [(src, gx)]
        if layer.kind == "relu":
            return [(src, ops.relu_backward(g, x))]
        if layer.kind == "maxpool":
            gx = ops.maxpool_backward(g, self.pool_idx[layer.id], x.shape)
            return [(src, gx)]
        if layer.kind == "avgpool":
            gx = ops.avgpool_backward(g, p["window"], p["stride"], p["pad"], x.shape)
            return [(src, gx)]
        if layer.kind == "batchnorm":
            wset = self.weights[layer.id]
            gx = ops.batchnorm_backward(g, wset["gamma"], wset["var"], p["eps"])
            return [(src, gx)]
        if layer.kind == "add":
            ga, gb = ops.add_backward(g)
            return [(layer.inputs[0], ga), (layer.inputs[1], gb)]
        if layer.kind == "concat":
            sizes = [self.outputs[s].shape[0] for s in layer.inputs]
            parts = ops.concat_backward(g, sizes)
            return list(zip(layer.inputs, parts))
        raise AssertionError(f"unhandled kind {layer.kind}")


@dataclass
class TapResult:
    taps: Dict[int, FeatureMap]
    tape: Tape


def forward_with_taps(graph: ArchGraph, weights, image, tap_ordinals) -> TapResult:
    """Run the graph on one image and collect activations at the given taps."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != graph.input_channels:
        raise ConfigurationError(
            f"{graph.name} expects {graph.input_channels}xHxW input, got {image.shape}"
        )
    if image.shape[1] < graph.min_input or image.shape[2] < graph.min_input:
        raise ConfigurationError(
            f"{graph.name} requires input of at least {graph.min_input}x{graph.min_input}, "
            f"got {image.shape[1]}x{image.shape[2]}"
        )
    if not np.isfinite(image).all():
        raise ConfigurationError("input image contains non-finite values")

    tap_ordinals = sorted({int(t) for t in tap_ordinals})
    tap_layers = {graph.taps.layer_id(t): t for t in tap_ordinals}

    outputs = {"input": image}
    pool_idx = {}
    for layer in graph.layers:
        p = layer.params
        x = outputs[layer.inputs[0]]
        if layer.kind == "conv":
            wset = weights[layer.id]
            out = ops.conv2d_forward(x, wset["weight"], wset.get("bias"), p["stride"], p["pad"])
        elif layer.kind == "relu":
            out = ops.relu_forward(x)
        elif layer.kind == "maxpool":
            out, idx = ops.maxpool_forward(x, p["window"], p["stride"], p["pad"])
            pool_idx[layer.id] = idx
        elif layer.kind == "avgpool":
            out = ops.avgpool_forward(x, p["window"], p["stride"], p["pad"])
        elif layer.kind == "batchnorm":
            wset = weights[layer.id]
            out = ops.batchnorm_forward(
                x, wset["gamma"], wset["beta"], wset["mean"], wset["var"], p["eps"]
            )
        elif layer.kind == "add":
            out = ops.add_forward(x, outputs[layer.inputs[1]])
        elif layer.kind == "concat":
            out = ops.concat_forward([outputs[s] for s in layer.inputs])
        else:
            raise AssertionError(layer.kind)
        outputs[layer.id] = out

    tape = Tape(graph, weights, outputs, pool_idx)
    taps = {
        ordinal: FeatureMap(lid, outputs[lid]) for lid, ordinal in tap_layers.items()
    }
    return TapResult(taps=taps, tape=tape)


# ------------------------------------------------------------ serialization

def graph_to_dict(graph: ArchGraph) -> dict:
    return {
        "name": graph.name,
        "input_channels": graph.input_channels,
        "min_input": graph.min_input,
        "layers": [
            {"id": l.id, "kind": l.kind, "inputs": list(l.inputs), "params": dict(l.params)}
            for l in graph.layers
        ],
        "taps": {
            "ordinals": {str(k): v for k, v in graph.taps.ordinals.items()},
            "content_default": graph.taps.content_default,
            "style_defaults": list(graph.taps.style_defaults),
        },
    }


def graph_from_dict(d: dict) -> ArchGraph:
    try:
        taps = TapRegistry(
            ordinals={int(k): v for k, v in d["taps"]["ordinals"].items()},
            content_default=int(d["taps"]["content_default"]),
            style_defaults=tuple(int(t) for t in d["taps"]["style_defaults"]),
        )
        layers = [
            LayerSpec(
                id=l["id"], kind=l["kind"], inputs=tuple(l["inputs"]), params=dict(l["params"])
            )
            for l in d["layers"]
        ]
        return ArchGraph(
            name=d["name"],
            layers=layers,
            taps=taps,
            input_channels=int(d["input_channels"]),
            min_input=int(d["min_input"]),
        )
    except KeyError as exc:
        raise ConfigurationError(f"graph description missing key {exc}") from exc


def save_graph_json(graph: ArchGraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=2, sort_keys=True)


def load_graph_json(path) -> ArchGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))
