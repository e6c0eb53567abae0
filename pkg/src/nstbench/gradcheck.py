"""Central finite-difference oracle for analytic gradients.

Checks d(scalar)/d(input) coordinate by coordinate:

    numeric = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)
    rel err = |numeric - analytic_i| / max(|analytic_i|, |numeric|, 1e-8)

ReLU kinks and max-pool winner switches make f non-differentiable along
some coordinates. Callers can supply signature_fn returning the piecewise
region fingerprint (relu sign masks, pool winner indices); a coordinate
whose two perturbed evaluations land in different regions is skipped
rather than misreported.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError


@dataclass
class GradCheckResult:
    max_rel_err: float
    checked: int
    skipped: int
    worst_coord: Optional[int] = None

    def __repr__(self):
        return (
            f"GradCheckResult(max_rel_err={self.max_rel_err:.3e}, "
            f"checked={self.checked}, skipped={self.skipped})"
        )


def _same_signature(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def finite_difference_check(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic_grad: np.ndarray,
    eps: float = 1e-3,
    coords: Optional[Sequence[int]] = None,
    signature_fn: Optional[Callable[[np.ndarray], tuple]] = None,
) -> GradCheckResult:
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    x = np.asarray(x)
    analytic_grad = np.asarray(analytic_grad)
    if analytic_grad.shape != x.shape:
        raise ConfigurationError(
            f"gradient shape {analytic_grad.shape} does not match input {x.shape}"
        )
    flat = x.reshape(-1)
    gflat = analytic_grad.reshape(-1)
    if coords is None:
        coords = range(flat.size)

    worst = 0.0
    worst_coord = None
    checked = 0
    skipped = 0
    for i in coords:
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(fn(x))
        sig_plus = signature_fn(x) if signature_fn is not None else None
        flat[i] = orig - eps
        f_minus = float(fn(x))
        sig_minus = signature_fn(x) if signature_fn is not None else None
        flat[i] = orig

        if signature_fn is not None and not _same_signature(sig_plus, sig_minus):
            skipped += 1
            continue
        numeric = (f_plus - f_minus) / (2.0 * eps)
        denom = max(abs(float(gflat[i])), abs(numeric), 1e-8)
        rel = abs(numeric - float(gflat[i])) / denom
        checked += 1
        if rel > worst:
            worst = rel
            worst_coord = int(i)
    return GradCheckResult(worst, checked, skipped, worst_coord)


def sample_coords(shape, n, rng):
    """n distinct flat coordinates, reproducible under the given Generator."""
    size = int(np.prod(shape))
    n = min(n, size)
    return rng.choice(size, size=n, replace=False)
