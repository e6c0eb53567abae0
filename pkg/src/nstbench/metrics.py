"""Image quality metrics.

All metrics consume [0,1] RGB CHW arrays and compute in float64.

- mse: mean of squared differences over every scalar
- psnr: 10*log10(MAX^2 / mse) in dB with MAX=1.0; identical images give
  math.inf (serialized as null)
- ssim: single-scale structural similarity on the ITU-R 601 luma plane,
  11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, L=1.0, mean over
  valid window positions only (no padding)
- deep_feature_distance: per-tap unit-normalized channel vectors compared
  position-wise through a fixed backbone; shaped like the well-known
  learned perceptual metric but with no calibration whatsoever, hence the
  deliberately different name
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError
from .graphs import ArchGraph, forward_with_taps

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ConfigurationError(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def mse(x, y) -> float:
    x, y = _check_pair(x, y)
    d = x - y
    return float(np.mean(d * d))


def psnr(x, y, peak: float = 1.0) -> float:
    m = mse(x, y)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / m)


def to_luma(x) -> np.ndarray:
    """RGB CHW -> HxW luma plane; single-channel input passes through."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x
    if x.ndim == 3 and x.shape[0] == 1:
        return x[0]
    if x.ndim == 3 and x.shape[0] == 3:
        return np.tensordot(LUMA_WEIGHTS, x, axes=(0, 0))
    raise ConfigurationError(f"expected HxW, 1xHxW or 3xHxW, got shape {x.shape}")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-d Gaussian weights."""
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g1 = np.exp(-(coords ** 2) / (2.0 * sigma * sigma))
    win = np.outer(g1, g1)
    return win / win.sum()


def ssim(x, y) -> float:
    x, y = _check_pair(x, y)
    lx = to_luma(x)
    ly = to_luma(y)
    h, w = lx.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ConfigurationError(
            f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )
    win = gaussian_window()
    wx = sliding_window_view(lx, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(ly, (SSIM_WINDOW, SSIM_WINDOW))
    mu_x = np.tensordot(wx, win, axes=([2, 3], [0, 1]))
    mu_y = np.tensordot(wy, win, axes=([2, 3], [0, 1]))
    xx = np.tensordot(wx * wx, win, axes=([2, 3], [0, 1]))
    yy = np.tensordot(wy * wy, win, axes=([2, 3], [0, 1]))
    xy = np.tensordot(wx * wy, win, axes=([2, 3], [0, 1]))
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass
class PerceptualConfig:
    """Backbone and tap weighting for the deep-feature distance."""

    graph: ArchGraph
    weights: dict
    taps: Tuple[int, ...]
    tap_weights: Optional[Dict[int, float]] = None
    channel_normalize: bool = True

    def tap_weight(self, tap: int) -> float:
        if self.tap_weights is None:
            return 1.0 / len(self.taps)
        return float(self.tap_weights[tap])


def _unit_channels(f: np.ndarray) -> np.ndarray:
    # normalize the channel vector at each spatial position
    norm = np.sqrt(np.sum(f * f, axis=0, keepdims=True))
    return f / (norm + 1e-10)


def deep_feature_distance(x, y, cfg: PerceptualConfig) -> float:
    x, y = _check_pair(x, y)
    from .images import normalize_image

    fx = forward_with_taps(cfg.graph, cfg.weights, normalize_image(x), cfg.taps).taps
    fy = forward_with_taps(cfg.graph, cfg.weights, normalize_image(y), cfg.taps).taps
    total = 0.0
    for tap in cfg.taps:
        a = fx[tap].data.astype(np.float64)
        b = fy[tap].data.astype(np.float64)
        if cfg.channel_normalize:
            a = _unit_channels(a)
            b = _unit_channels(b)
        d = a - b
        # mean over spatial positions of squared channel distance
        per_pos = np.sum(d * d, axis=0)
        total += cfg.tap_weight(tap) * float(np.mean(per_pos))
    return total
