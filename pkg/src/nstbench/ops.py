"""Dense tensor ops with analytic input gradients.

Activations are CHW numpy arrays, float32 on the production path (float64
is accepted everywhere for high-precision checking). Reductions accumulate
in float64 regardless of activation dtype. Only the input image is ever
optimized, so backward passes produce input gradients exclusively; weight
gradients do not exist in this codebase.

Convolution kernels may be rectangular (kh, kw) with asymmetric zero
padding (ph, pw). stride/pad arguments accept a single int for the square
case.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError


def _pair(v, name):
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ConfigurationError(f"{name} must be an int or a pair, got {v!r}")
        a, b = int(v[0]), int(v[1])
    else:
        a = b = int(v)
    return a, b


def _check_chw(x, name="input"):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ConfigurationError(f"{name} must be a 3-d CHW array, got shape {x.shape}")
    if x.dtype not in (np.float32, np.float64):
        raise ConfigurationError(f"{name} must be float32 or float64, got {x.dtype}")
    return x


@dataclass
class FeatureMap:
    """Activations at a tapped layer, kept in CHW layout."""

    layer_id: str
    data: np.ndarray

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def positions(self):
        return self.data.shape[1] * self.data.shape[2]

    def as_matrix(self):
        """(channels, positions) view; row-major flattening, zero copy."""
        c = self.data.shape[0]
        return self.data.reshape(c, -1)


# ---------------------------------------------------------------- conv2d

def conv2d_forward(x, weight, bias=None, stride=1, pad=0):
    x = _check_chw(x)
    weight = np.asarray(weight)
    if weight.ndim != 4:
        raise ConfigurationError(f"conv weight must be 4-d, got shape {weight.shape}")
    sh, sw = _pair(stride, "stride")
    ph, pw = _pair(pad, "pad")
    if sh < 1 or sw < 1:
        raise ConfigurationError(f"stride must be >= 1, got {(sh, sw)}")
    if ph < 0 or pw < 0:
        raise ConfigurationError(f"pad must be >= 0, got {(ph, pw)}")
    cout, cin, kh, kw = weight.shape
    if cin != x.shape[0]:
        raise ConfigurationError(
            f"channel mismatch: input {x.shape} vs weight {weight.shape}"
        )
    h, w = x.shape[1], x.shape[2]
    if kh > h + 2 * ph or kw > w + 2 * pw:
        raise ConfigurationError(
            f"kernel {(kh, kw)} exceeds padded input {(h + 2 * ph, w + 2 * pw)}"
        )
    if bias is None:
        bias = np.zeros(cout, dtype=x.dtype)
    bias = np.asarray(bias, dtype=x.dtype)
    if bias.shape != (cout,):
        raise ConfigurationError(f"bias shape {bias.shape} != ({cout},)")
    out = kernels.conv2d_forward(x, weight.astype(x.dtype, copy=False), bias, sh, sw, ph, pw)
    return np.asarray(out, dtype=x.dtype)


def conv2d_backward(gout, weight, stride=1, pad=0, input_hw=None):
    """Gradient wrt the conv input. Only needs the weights, not the input."""
    gout = _check_chw(gout, "upstream gradient")
    weight = np.asarray(weight)
    sh, sw = _pair(stride, "stride")
    ph, pw = _pair(pad, "pad")
    h, w = int(input_hw[0]), int(input_hw[1])
    kh, kw = weight.shape[2], weight.shape[3]
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    # a mismatch here is a graph-builder bug, not user input
    assert gout.shape == (weight.shape[0], ho, wo), (
        f"upstream shape {gout.shape} inconsistent with conv geometry "
        f"{(weight.shape[0], ho, wo)}"
    )
    gx = kernels.conv2d_backward_input(
        gout, weight.astype(gout.dtype, copy=False), sh, sw, ph, pw, h, w
    )
    return np.asarray(gx, dtype=gout.dtype)


# ----------------------------------------------------------------- relu

def relu_forward(x):
    x = _check_chw(x)
    return np.maximum(x, 0)


def relu_backward(gout, x_pre):
    # subgradient at exactly zero is zero, hence strict >
    return np.where(x_pre > 0, gout, 0).astype(gout.dtype, copy=False)


# ---------------------------------------------------------------- pooling

def _pool_geometry(x, window, stride, pad):
    k = int(window)
    s = int(stride)
    ph, pw = _pair(pad, "pad")
    if k < 1:
        raise ConfigurationError(f"window must be >= 1, got {k}")
    if s < 1:
        raise ConfigurationError(f"stride must be >= 1, got {s}")
    h, w = x.shape[1], x.shape[2]
    if k > h + 2 * ph or k > w + 2 * pw:
        raise ConfigurationError(
            f"pool window {k} exceeds padded spatial dims {(h + 2 * ph, w + 2 * pw)}"
        )
    return k, s, ph, pw


def maxpool_forward(x, window, stride, pad=0):
    """Returns (output, winner_indices); winners index the unpadded input plane."""
    x = _check_chw(x)
    k, s, ph, pw = _pool_geometry(x, window, stride, pad)
    out, idx = kernels.maxpool_forward(x, k, s, ph, pw)
    assert idx.min() >= 0, "max-pool window contained only padding"
    return np.asarray(out, dtype=x.dtype), idx


def maxpool_backward(gout, idx, input_shape):
    gout = _check_chw(gout, "upstream gradient")
    c, h, w = input_shape
    assert gout.shape == idx.shape, (gout.shape, idx.shape)
    gx = kernels.maxpool_backward(gout, idx, c, h, w)
    return np.asarray(gx, dtype=gout.dtype)


def avgpool_forward(x, window, stride, pad=0):
    x = _check_chw(x)
    k, s, ph, pw = _pool_geometry(x, window, stride, pad)
    out = kernels.avgpool_forward(x, k, s, ph, pw)
    return np.asarray(out, dtype=x.dtype)


def avgpool_backward(gout, window, stride, pad, input_shape):
    gout = _check_chw(gout, "upstream gradient")
    c, h, w = input_shape
    k, s = int(window), int(stride)
    ph, pw = _pair(pad, "pad")
    gx = kernels.avgpool_backward(gout, k, s, ph, pw, c, h, w)
    return np.asarray(gx, dtype=gout.dtype)


# -------------------------------------------------------------- batchnorm

def batchnorm_forward(x, gamma, beta, running_mean, running_var, eps=1e-5):
    """Inference-mode normalization with frozen statistics."""
    x = _check_chw(x)
    c = x.shape[0]
    for name, arr in (("gamma", gamma), ("beta", beta),
                      ("running_mean", running_mean), ("running_var", running_var)):
        arr = np.asarray(arr)
        if arr.shape != (c,):
            raise ConfigurationError(
                f"batchnorm {name} shape {arr.shape} does not match {c} channels"
            )
    var = np.asarray(running_var, dtype=np.float64)
    if np.any(var + eps <= 0):
        raise ConfigurationError("batchnorm requires var + eps > 0 for every channel")
    scale = np.asarray(gamma, dtype=np.float64) / np.sqrt(var + eps)
    shift = np.asarray(beta, dtype=np.float64) - scale * np.asarray(running_mean, dtype=np.float64)
    out = x.astype(np.float64) * scale[:, None, None] + shift[:, None, None]
    return out.astype(x.dtype, copy=False)


def batchnorm_backward(gout, gamma, running_var, eps=1e-5):
    gout = _check_chw(gout, "upstream gradient")
    scale = np.asarray(gamma, dtype=np.float64) / np.sqrt(
        np.asarray(running_var, dtype=np.float64) + eps
    )
    gx = gout.astype(np.float64) * scale[:, None, None]
    return gx.astype(gout.dtype, copy=False)


# ------------------------------------------------------------- add/concat

def add_forward(a, b):
    a = _check_chw(a, "lhs")
    b = _check_chw(b, "rhs")
    if a.shape != b.shape:
        raise ConfigurationError(f"add requires identical shapes, got {a.shape} vs {b.shape}")
    return (a.astype(np.float64) + b.astype(np.float64)).astype(a.dtype, copy=False)


def add_backward(gout):
    return gout, gout


def concat_forward(parts):
    if not parts:
        raise ConfigurationError("concat needs at least one input")
    parts = [_check_chw(p, f"concat input {i}") for i, p in enumerate(parts)]
    spatial = parts[0].shape[1:]
    for i, p in enumerate(parts[1:], start=1):
        if p.shape[1:] != spatial:
            raise ConfigurationError(
                f"concat spatial mismatch: input 0 is {spatial}, input {i} is {p.shape[1:]}"
            )
    return np.concatenate(parts, axis=0)


def concat_backward(gout, channel_sizes):
    assert sum(channel_sizes) == gout.shape[0], (channel_sizes, gout.shape)
    splits = np.cumsum(channel_sizes)[:-1]
    return [np.ascontiguousarray(g) for g in np.split(gout, splits, axis=0)]
