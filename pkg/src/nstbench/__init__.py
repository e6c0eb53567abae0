"""Desk-scale benchmark suite for optimization-based neural style transfer.

Pure CPU stack: a small dense tensor kernel with analytic input gradients,
a declarative architecture zoo, a pixel-space Adam optimizer, quality
metrics, an analytic cost profiler, a self-contained statistics lab, and a
batch harness with CSV/SVG/JSON reporting.
"""

__version__ = "0.1.0"

from .errors import ConfigurationError, DivergenceError, WeightFormatError

__all__ = [
    "ConfigurationError",
    "DivergenceError",
    "WeightFormatError",
    "__version__",
]
