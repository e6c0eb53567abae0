"""Analytic cost model plus wall-clock forward timing.

Conventions, recorded verbatim in report metadata:

- params: learnable tensors only (conv weights, conv bias where declared,
  batchnorm gamma/beta). Batchnorm running statistics are counted and
  reported separately as non-learnable.
- FLOPs: one multiply-accumulate = 2 FLOPs. Conv contributes
  2*kh*kw*Cin*Cout*Hout*Wout. Cheap layers contribute a small fixed count
  per output element: relu 1, add 1, maxpool 1, avgpool 2, batchnorm 4,
  concat 0.
- activation memory: 4 bytes per output element. The total sums every
  layer output once; the peak walks the topological schedule, freeing each
  tensor after its last consumer (the graph input is not a layer output
  and is excluded, matching the sequential-chain oracle of max consecutive
  pair).
- timing: median over repeats (>= 3) after warmup runs, single thread,
  reported with a machine fingerprint. A process-wide lock serializes
  timing against concurrent benchmark work.
"""

import os
import platform
import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .graphs import ArchGraph, forward_with_taps
from .weights import init_weights

FLOPS_PER_ELEMENT = {"relu": 1, "add": 1, "maxpool": 1, "avgpool": 2,
                     "batchnorm": 4, "concat": 0}

_TIMING_LOCK = threading.Lock()


def _pair(v):
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def propagate_shapes(graph: ArchGraph, input_hw) -> Dict[str, Tuple[int, int, int]]:
    """Output CHW shape of every layer for a given input size."""
    h, w = int(input_hw[0]), int(input_hw[1])
    if h < graph.min_input or w < graph.min_input:
        raise ConfigurationError(
            f"{graph.name} requires at least {graph.min_input}px input, got {h}x{w}"
        )
    shapes: Dict[str, Tuple[int, int, int]] = {"input": (graph.input_channels, h, w)}
    for layer in graph.layers:
        p = layer.params
        c, ih, iw = shapes[layer.inputs[0]]
        if layer.kind == "conv":
            kh, kw = _pair(p["kernel"])
            sh, sw = _pair(p["stride"])
            ph, pw = _pair(p["pad"])
            if p["in_channels"] != c:
                raise ConfigurationError(
                    f"layer {layer.id}: expects {p['in_channels']} channels, gets {c}"
                )
            oh = (ih + 2 * ph - kh) // sh + 1
            ow = (iw + 2 * pw - kw) // sw + 1
            if oh < 1 or ow < 1:
                raise ConfigurationError(
                    f"layer {layer.id}: kernel does not fit {ih}x{iw} input"
                )
            shapes[layer.id] = (p["out_channels"], oh, ow)
        elif layer.kind in ("maxpool", "avgpool"):
            k = int(p["window"])
            s = int(p["stride"])
            ph, pw = _pair(p["pad"])
            oh = (ih + 2 * ph - k) // s + 1
            ow = (iw + 2 * pw - k) // s + 1
            if oh < 1 or ow < 1:
                raise ConfigurationError(f"layer {layer.id}: window does not fit {ih}x{iw}")
            shapes[layer.id] = (c, oh, ow)
        elif layer.kind == "concat":
            parts = [shapes[s] for s in layer.inputs]
            if len({(p1[1], p1[2]) for p1 in parts}) != 1:
                raise ConfigurationError(f"layer {layer.id}: concat spatial mismatch")
            shapes[layer.id] = (sum(p1[0] for p1 in parts), parts[0][1], parts[0][2])
        else:  # relu, batchnorm, add keep their input shape
            shapes[layer.id] = (c, ih, iw)
    return shapes


@dataclass
class ParamCount:
    learnable: int
    non_learnable: int
    per_layer: Dict[str, int] = field(default_factory=dict)


def count_params(graph: ArchGraph) -> ParamCount:
    learnable = 0
    frozen = 0
    per_layer = {}
    for layer in graph.layers:
        p = layer.params
        if layer.kind == "conv":
            kh, kw = _pair(p["kernel"])
            n = p["out_channels"] * p["in_channels"] * kh * kw
            if p["bias"]:
                n += p["out_channels"]
            per_layer[layer.id] = n
            learnable += n
        elif layer.kind == "batchnorm":
            per_layer[layer.id] = 2 * p["channels"]
            learnable += 2 * p["channels"]
            frozen += 2 * p["channels"]
    return ParamCount(learnable=learnable, non_learnable=frozen, per_layer=per_layer)


def count_flops(graph: ArchGraph, input_hw, up_to_tap: Optional[int] = None) -> int:
    """Forward FLOPs; a tap ordinal truncates at that layer (inclusive)."""
    shapes = propagate_shapes(graph, input_hw)
    stop_index = len(graph.layers) - 1
    if up_to_tap is not None:
        stop_id = graph.taps.layer_id(int(up_to_tap))
        stop_index = next(i for i, l in enumerate(graph.layers) if l.id == stop_id)
    total = 0
    for layer in graph.layers[: stop_index + 1]:
        c, oh, ow = shapes[layer.id]
        elems = c * oh * ow
        if layer.kind == "conv":
            p = layer.params
            kh, kw = _pair(p["kernel"])
            total += 2 * kh * kw * p["in_channels"] * p["out_channels"] * oh * ow
        else:
            total += FLOPS_PER_ELEMENT[layer.kind] * elems
    return total


@dataclass
class MemoryReport:
    total_bytes: int
    peak_bytes: int


def activation_memory(graph: ArchGraph, input_hw) -> MemoryReport:
    shapes = propagate_shapes(graph, input_hw)
    nbytes = {l.id: 4 * int(np.prod(shapes[l.id])) for l in graph.layers}
    total = sum(nbytes.values())

    last_use = {l.id: i for i, l in enumerate(graph.layers)}
    for i, layer in enumerate(graph.layers):
        for src in layer.inputs:
            if src != "input":
                last_use[src] = i

    alive: Dict[str, int] = {}
    peak = 0
    for i, layer in enumerate(graph.layers):
        alive[layer.id] = nbytes[layer.id]
        current = sum(alive.values())
        peak = max(peak, current)
        for lid in [k for k, v in last_use.items() if v == i and k in alive]:
            del alive[lid]
    return MemoryReport(total_bytes=total, peak_bytes=peak)


def machine_fingerprint() -> dict:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo", "r", encoding="utf-8") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return {
        "cpu": cpu,
        "logical_cores": os.cpu_count(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "kernel_backend": kernels.ACTIVE_BACKEND,
    }


@dataclass
class TimingReport:
    median_ms: float
    runs_ms: Tuple[float, ...]
    warmup: int
    fingerprint: dict


def time_forward(graph: ArchGraph, weights, input_hw, repeats: int = 5,
                 warmup: int = 1, seed: int = 0) -> TimingReport:
    if repeats < 3:
        raise ConfigurationError(f"timing needs at least 3 repeats, got {repeats}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((graph.input_channels, int(input_hw[0]), int(input_hw[1])))
    x = x.astype(np.float32)
    tap = min(graph.taps.ordinals)
    with _TIMING_LOCK:
        for _ in range(warmup):
            forward_with_taps(graph, weights, x, [tap])
        runs = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            forward_with_taps(graph, weights, x, [tap])
            runs.append((time.perf_counter() - t0) * 1000.0)
    return TimingReport(median_ms=float(statistics.median(runs)), runs_ms=tuple(runs),
                        warmup=warmup, fingerprint=machine_fingerprint())


@dataclass
class CostReport:
    arch: str
    input_hw: Tuple[int, int]
    params_learnable: int
    params_non_learnable: int
    flops_full: int
    flops_to_style_tap: int
    activation_total_bytes: int
    activation_peak_bytes: int
    forward_ms: Optional[float] = None
    fingerprint: Optional[dict] = None

    @property
    def params_millions(self) -> float:
        return self.params_learnable / 1e6

    @property
    def flops_giga(self) -> float:
        return self.flops_full / 1e9


def profile_arch(graph: ArchGraph, input_hw, *, weights=None, seed: int = 0,
                 with_timing: bool = True, repeats: int = 5, warmup: int = 1) -> CostReport:
    pc = count_params(graph)
    mem = activation_memory(graph, input_hw)
    report = CostReport(
        arch=graph.name,
        input_hw=(int(input_hw[0]), int(input_hw[1])),
        params_learnable=pc.learnable,
        params_non_learnable=pc.non_learnable,
        flops_full=count_flops(graph, input_hw),
        flops_to_style_tap=count_flops(graph, input_hw,
                                       up_to_tap=graph.taps.deepest_style_default),
        activation_total_bytes=mem.total_bytes,
        activation_peak_bytes=mem.peak_bytes,
    )
    if with_timing:
        if weights is None:
            weights = init_weights(graph, seed)
        timing = time_forward(graph, weights, input_hw, repeats=repeats, warmup=warmup)
        report.forward_ms = timing.median_ms
        report.fingerprint = timing.fingerprint
    return report
