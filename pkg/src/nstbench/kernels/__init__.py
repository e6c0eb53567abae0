"""Kernel backend selection.

The hot inner loops (convolution, pooling) exist twice: a numba-jitted
version and a pure-numpy version. NST_BENCH_BACKEND picks one at import
time:

    auto   use numba when importable, else numpy (default)
    numba  require numba, fail loudly if missing
    numpy  force the fallback path

Both backends are importable side by side (benchmarks and equivalence
tests do exactly that); the env var only controls which one the rest of
the package calls.
"""

import os

_ENV_VAR = "NST_BENCH_BACKEND"
_VALID = ("auto", "numba", "numpy")


def _select():
    want = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if want not in _VALID:
        raise RuntimeError(f"{_ENV_VAR} must be one of {_VALID}, got {want!r}")
    if want in ("auto", "numba"):
        try:
            from . import numba_backend
            return numba_backend, "numba"
        except ImportError:
            if want == "numba":
                raise
    from . import numpy_backend
    return numpy_backend, "numpy"


_impl, ACTIVE_BACKEND = _select()

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
avgpool_forward = _impl.avgpool_forward
avgpool_backward = _impl.avgpool_backward
