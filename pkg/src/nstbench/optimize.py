"""Pixel-space optimization loop.

The optimization variable is the standardized image tensor; nothing else
has gradients. Plain Adam (b1=0.9, b2=0.999, eps=1e-8) at a constant
learning rate, initialized from the content image. No box constraint is
applied during optimization; export clamps to [0,1].

The loop is single-threaded and allocation-stable, so a fixed
(weights, images, config) triple reproduces its trajectory bit for bit.
"""

import csv
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .graphs import ArchGraph, forward_with_taps
from .images import denormalize_image, normalize_image
from .losses import LossBreakdown, LossWeights, gram, total_loss


@dataclass
class OptimConfig:
    learning_rate: float = 0.05
    max_epochs: int = 5000
    checkpoint_epochs: Tuple[int, ...] = (100, 2500, 5000)
    log_every: int = 10
    seed: int = 0

    def validate(self):
        if not (self.learning_rate > 0):
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.log_every < 1:
            raise ConfigurationError(f"log_every must be >= 1, got {self.log_every}")
        for e in self.checkpoint_epochs:
            if not (1 <= e <= self.max_epochs):
                raise ConfigurationError(
                    f"checkpoint epoch {e} outside [1, {self.max_epochs}]"
                )


@dataclass
class TracePoint:
    epoch: int
    total: float
    content: float
    style: float
    wall_seconds: float


@dataclass
class OptimizationTrace:
    points: List[TracePoint] = field(default_factory=list)
    checkpoints: Dict[int, np.ndarray] = field(default_factory=dict)
    final_epoch: int = 0
    training_seconds: float = 0.0

    def loss_at(self, epoch: int) -> float:
        for p in self.points:
            if p.epoch == epoch:
                return p.total
        raise KeyError(f"epoch {epoch} was not logged")

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "total_loss", "content_loss", "style_loss", "wall_seconds"])
            for p in self.points:
                w.writerow([p.epoch, repr(p.total), repr(p.content), repr(p.style),
                            f"{p.wall_seconds:.3f}"])


def optimize(content_img, style_img, graph: ArchGraph, weights_dict,
             loss_weights: LossWeights, cfg: OptimConfig):
    """Run style transfer; returns ([0,1] output image, OptimizationTrace).

    content_img and style_img are [0,1] RGB CHW arrays of identical size.
    Raises DivergenceError when the loss goes non-finite, with the epoch
    attached; the partial trace is attached to the exception as .trace.
    """
    cfg.validate()
    content_img = np.asarray(content_img, dtype=np.float32)
    style_img = np.asarray(style_img, dtype=np.float32)
    if content_img.shape != style_img.shape:
        raise ConfigurationError(
            f"content {content_img.shape} and style {style_img.shape} sizes differ"
        )

    content_n = normalize_image(content_img)
    style_n = normalize_image(style_img)

    taps_needed = sorted({loss_weights.content_tap, *loss_weights.style_taps})
    with np.errstate(over="ignore", invalid="ignore"):
        content_ref = forward_with_taps(graph, weights_dict, content_n,
                                        [loss_weights.content_tap])
        content_target = content_ref.taps[loss_weights.content_tap]
        style_ref = forward_with_taps(graph, weights_dict, style_n,
                                      list(loss_weights.style_taps))
        style_grams = {t: gram(fm) for t, fm in style_ref.taps.items()}

    x = content_n.copy()
    m = np.zeros_like(x, dtype=np.float64)
    v = np.zeros_like(x, dtype=np.float64)
    b1, b2, eps = 0.9, 0.999, 1e-8
    lr = float(cfg.learning_rate)

    trace = OptimizationTrace()
    t0 = time.perf_counter()

    def _log(epoch: int, bd: LossBreakdown):
        trace.points.append(TracePoint(epoch, bd.total, bd.content, bd.style,
                                       time.perf_counter() - t0))

    for epoch in range(1, cfg.max_epochs + 1):
        # overflow to inf here is an expected, handled condition: the
        # finiteness check below turns it into DivergenceError
        with np.errstate(over="ignore", invalid="ignore"):
            result = forward_with_taps(graph, weights_dict, x, taps_needed)
            bd = total_loss(result.taps, content_target, style_grams, loss_weights)
        if not np.isfinite(bd.total):
            trace.final_epoch = epoch
            trace.training_seconds = time.perf_counter() - t0
            err = DivergenceError(epoch)
            err.trace = trace
            raise err

        if epoch % cfg.log_every == 0 or epoch == 1 or epoch == cfg.max_epochs \
                or epoch in cfg.checkpoint_epochs:
            _log(epoch, bd)

        g = result.tape.backward(bd.tap_grads).astype(np.float64)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        mhat = m / (1.0 - b1 ** epoch)
        vhat = v / (1.0 - b2 ** epoch)
        x = (x.astype(np.float64) - lr * mhat / (np.sqrt(vhat) + eps)).astype(np.float32)

        if epoch in cfg.checkpoint_epochs:
            trace.checkpoints[epoch] = denormalize_image(x, clamp=True)

    trace.final_epoch = cfg.max_epochs
    trace.training_seconds = time.perf_counter() - t0
    return denormalize_image(x, clamp=True), trace
