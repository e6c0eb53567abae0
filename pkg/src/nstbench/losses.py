"""Reconstruction losses over tapped activations, with analytic gradients.

Conventions (all sums accumulate in float64):

    gram(F)        G = F F^T over the (channels, positions) matrix, raw sums,
                   no normalization inside
    content        L = 0.5 * sum((F - P)^2),        dL/dF = F - P
    style term     E = sum((G - A)^2) / (4 N^2 M^2)
                   dE/dF = ((G - A) @ F) / (N^2 M^2)
    style loss     sum_l w_l E_l, weights default to uniform 1/num_taps
    total          alpha * content + beta * style

N is the channel count and M the spatial position count of the tap that
produced G. Gradients are returned in feature-map layout so they can seed
the graph tape directly.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ConfigurationError
from .ops import FeatureMap


def gram(features: FeatureMap) -> np.ndarray:
    """(N, N) float64 gram matrix of raw channel co-activations."""
    f = features.as_matrix().astype(np.float64)
    return f @ f.T


def content_loss(current: FeatureMap, target_gram_free: FeatureMap):
    """Returns (loss, dloss/dcurrent) for the squared feature distance."""
    f = current.data.astype(np.float64)
    p = target_gram_free.data.astype(np.float64)
    if f.shape != p.shape:
        raise ConfigurationError(
            f"content tap shapes differ: {f.shape} vs {p.shape}"
        )
    diff = f - p
    loss = 0.5 * float(np.sum(diff * diff))
    return loss, diff


def style_term(current: FeatureMap, target_gram: np.ndarray):
    """Single-tap style energy and its gradient wrt the tapped features."""
    n = current.channels
    m = current.positions
    if target_gram.shape != (n, n):
        raise ConfigurationError(
            f"style gram shape {target_gram.shape} does not match {n} channels"
        )
    f = current.as_matrix().astype(np.float64)
    g = f @ f.T
    diff = g - np.asarray(target_gram, dtype=np.float64)
    denom = float(n * n) * float(m * m)
    loss = float(np.sum(diff * diff)) / (4.0 * denom)
    grad_mat = (diff @ f) / denom
    return loss, grad_mat.reshape(current.data.shape)


@dataclass
class LossWeights:
    """alpha/beta mix plus per-tap style weighting."""

    alpha: float = 1.0
    beta: float = 1e8
    content_tap: int = 2
    style_taps: tuple = (8,)
    style_layer_weights: Optional[Dict[int, float]] = None

    def layer_weight(self, tap: int) -> float:
        if self.style_layer_weights is None:
            return 1.0 / len(self.style_taps)
        try:
            return float(self.style_layer_weights[tap])
        except KeyError:
            raise ConfigurationError(f"no style layer weight for tap {tap}") from None


@dataclass
class LossBreakdown:
    total: float
    content: float
    style: float
    tap_grads: Dict[int, np.ndarray] = field(repr=False, default_factory=dict)


def total_loss(taps: Dict[int, FeatureMap], content_target: FeatureMap,
               style_grams: Dict[int, np.ndarray], weights: LossWeights) -> LossBreakdown:
    """Weighted content+style objective over one forward pass's taps.

    tap_grads holds d(total)/d(tapped features) keyed by ordinal, ready to
    seed Tape.backward. The content tap and style taps may coincide; their
    gradients accumulate.
    """
    if weights.content_tap not in taps:
        raise ConfigurationError(f"content tap {weights.content_tap} missing from forward taps")
    c_loss, c_grad = content_loss(taps[weights.content_tap], content_target)

    s_loss = 0.0
    tap_grads: Dict[int, np.ndarray] = {}
    for tap in weights.style_taps:
        if tap not in taps:
            raise ConfigurationError(f"style tap {tap} missing from forward taps")
        if tap not in style_grams:
            raise ConfigurationError(f"no target gram for style tap {tap}")
        w_l = weights.layer_weight(tap)
        e, g = style_term(taps[tap], style_grams[tap])
        s_loss += w_l * e
        tap_grads[tap] = weights.beta * w_l * g

    cg = weights.alpha * c_grad
    if weights.content_tap in tap_grads:
        tap_grads[weights.content_tap] = tap_grads[weights.content_tap] + cg
    else:
        tap_grads[weights.content_tap] = cg

    total = weights.alpha * c_loss + weights.beta * s_loss
    return LossBreakdown(total=total, content=c_loss, style=s_loss, tap_grads=tap_grads)
