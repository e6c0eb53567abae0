"""Procedural test images.

The suite ships no photographs. Content images are smooth sine-field
compositions with a soft radial focus; style images are wax-resist-like
textile patterns built from angled stripe waves, dot lattices, and
crackle interference. Everything is a pure function of (size, seed).
"""

import numpy as np


def _grids(size):
    c = np.linspace(0.0, 1.0, size, dtype=np.float64)
    return np.meshgrid(c, c, indexing="ij")


def content_pattern(size: int, seed: int = 0) -> np.ndarray:
    """Smooth multi-scale composition, float32 3xHxW in [0,1]."""
    rng = np.random.default_rng(int(seed))
    yy, xx = _grids(size)
    chans = []
    cx, cy = rng.uniform(0.3, 0.7, size=2)
    for ch in range(3):
        f1, f2 = rng.uniform(1.0, 3.0, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        field = (
            0.30 * np.sin(2 * np.pi * f1 * xx + phase[0])
            + 0.30 * np.sin(2 * np.pi * f2 * yy + phase[1])
            + 0.25 * np.sin(2 * np.pi * (f1 * xx + f2 * yy) / 2 + phase[2])
        )
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / 0.08)
        chans.append(0.5 + 0.35 * field + 0.25 * blob - 0.12)
    img = np.stack(chans, axis=0)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def style_pattern(size: int, seed: int = 0) -> np.ndarray:
    """High-frequency stripe/dot/crackle texture, float32 3xHxW in [0,1]."""
    rng = np.random.default_rng(int(seed) + 7919)
    yy, xx = _grids(size)
    theta = rng.uniform(0, np.pi)
    rot = xx * np.cos(theta) + yy * np.sin(theta)
    stripes = np.tanh(4.0 * np.sin(2 * np.pi * rng.uniform(6, 12) * rot))
    fd = rng.uniform(8, 14)
    dots = np.sin(2 * np.pi * fd * xx) * np.sin(2 * np.pi * fd * yy)
    dots = (dots > 0.55).astype(np.float64)
    crackle = np.sin(2 * np.pi * rng.uniform(3, 5) * xx + 3.0 * np.sin(2 * np.pi * 2 * yy))
    palette = rng.uniform(0.15, 0.85, size=(3, 3))  # per-channel mix weights
    chans = []
    for ch in range(3):
        w = palette[ch]
        v = 0.5 + 0.28 * w[0] * stripes + 0.30 * w[1] * (dots - 0.5) + 0.22 * w[2] * crackle
        chans.append(v)
    img = np.stack(chans, axis=0)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def pattern_pair(size: int, seed: int = 0):
    return content_pattern(size, seed), style_pattern(size, seed)
