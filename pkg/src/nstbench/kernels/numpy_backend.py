"""Pure-numpy kernel implementations.

Fallback path used when numba is unavailable or explicitly disabled via
NST_BENCH_BACKEND=numpy. Contract shared with the numba backend:

- inputs are float32 or float64 CHW arrays, kernels never mutate them
- all reductions accumulate in float64
- results come back as float64; the op layer casts to the caller's dtype

Accumulation order is fixed per backend, so repeated calls on the same
build are bit-identical. The two backends agree to float32 precision but
not bit-for-bit (different summation order).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pad2d(x, ph, pw, value):
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw)), mode="constant", constant_values=value)


def _windows(x, kh, kw, sh, sw):
    # (C, Ho, Wo, kh, kw) view, no copy
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))
    return win[:, ::sh, ::sw, :, :]


def conv2d_forward(x, w, b, sh, sw, ph, pw):
    xp = _pad2d(np.asarray(x, dtype=np.float64), ph, pw, 0.0)
    w64 = np.asarray(w, dtype=np.float64)
    win = _windows(xp, w.shape[2], w.shape[3], sh, sw)
    out = np.tensordot(w64, win, axes=([1, 2, 3], [0, 3, 4]))
    out += np.asarray(b, dtype=np.float64)[:, None, None]
    return out


def conv2d_backward_input(gout, w, sh, sw, ph, pw, h, wd):
    cout, ho, wo = gout.shape
    kh, kw = w.shape[2], w.shape[3]
    g64 = np.asarray(gout, dtype=np.float64)
    w64 = np.asarray(w, dtype=np.float64)
    gxp = np.zeros((w.shape[1], h + 2 * ph, wd + 2 * pw), dtype=np.float64)
    for di in range(kh):
        for dj in range(kw):
            # contribution of kernel cell (di, dj) to every covered input cell
            contrib = np.tensordot(w64[:, :, di, dj], g64, axes=(0, 0))
            gxp[:, di : di + sh * ho : sh, dj : dj + sw * wo : sw] += contrib
    return gxp[:, ph : ph + h, pw : pw + wd]


def maxpool_forward(x, k, s, ph, pw):
    c, h, wd = x.shape
    xp = _pad2d(np.asarray(x, dtype=np.float64), ph, pw, -np.inf)
    win = _windows(xp, k, k, s, s)
    ho, wo = win.shape[1], win.shape[2]
    flat = win.reshape(c, ho, wo, k * k)
    # np.argmax takes the first maximum in row-major window order;
    # -inf padding can never win for finite inputs
    local = np.argmax(flat, axis=3)
    out = np.take_along_axis(flat, local[..., None], axis=3)[..., 0]
    oh = np.arange(ho)[None, :, None]
    ow = np.arange(wo)[None, None, :]
    ih = oh * s - ph + local // k
    iw = ow * s - pw + local % k
    idx = (ih * wd + iw).astype(np.int64)
    return out, idx


def maxpool_backward(gout, idx, c, h, wd):
    gx = np.zeros((c, h * wd), dtype=np.float64)
    g64 = np.asarray(gout, dtype=np.float64)
    for ci in range(c):
        # bincount gives a fixed accumulation order for duplicate winners
        gx[ci] = np.bincount(idx[ci].ravel(), weights=g64[ci].ravel(), minlength=h * wd)
    return gx.reshape(c, h, wd)


def avgpool_forward(x, k, s, ph, pw):
    xp = _pad2d(np.asarray(x, dtype=np.float64), ph, pw, 0.0)
    win = _windows(xp, k, k, s, s)
    # count_include_pad semantics: divide by the full window area
    return win.sum(axis=(3, 4), dtype=np.float64) / float(k * k)


def avgpool_backward(gout, k, s, ph, pw, c, h, wd):
    ho, wo = gout.shape[1], gout.shape[2]
    g = np.asarray(gout, dtype=np.float64) / float(k * k)
    gxp = np.zeros((c, h + 2 * ph, wd + 2 * pw), dtype=np.float64)
    for di in range(k):
        for dj in range(k):
            gxp[:, di : di + s * ho : s, dj : dj + s * wo : s] += g
    return gxp[:, ph : ph + h, pw : pw + wd]
