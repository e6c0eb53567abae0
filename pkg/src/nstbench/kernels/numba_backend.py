"""Numba-jitted kernel implementations.

Same contract as numpy_backend: float32/float64 CHW inputs, float64
accumulation, float64 results cast by the op layer. Loops are explicit
and single-threaded; per-output-element reduction order is fixed, so
results are bit-identical across runs and thread settings.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv2d_forward(x, w, b, sh, sw, ph, pw):
    cin, h, wd = x.shape
    cout = w.shape[0]
    kh = w.shape[2]
    kw = w.shape[3]
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    out = np.empty((cout, ho, wo), dtype=np.float64)
    for co in range(cout):
        for oh in range(ho):
            ih0 = oh * sh - ph
            for ow in range(wo):
                iw0 = ow * sw - pw
                acc = 0.0
                for ci in range(cin):
                    for di in range(kh):
                        ih = ih0 + di
                        if ih < 0 or ih >= h:
                            continue
                        for dj in range(kw):
                            iw = iw0 + dj
                            if iw < 0 or iw >= wd:
                                continue
                            acc += np.float64(x[ci, ih, iw]) * np.float64(w[co, ci, di, dj])
                out[co, oh, ow] = acc + np.float64(b[co])
    return out


@njit(cache=True)
def conv2d_backward_input(gout, w, sh, sw, ph, pw, h, wd):
    cout = gout.shape[0]
    ho = gout.shape[1]
    wo = gout.shape[2]
    cin = w.shape[1]
    kh = w.shape[2]
    kw = w.shape[3]
    gx = np.zeros((cin, h, wd), dtype=np.float64)
    for co in range(cout):
        for oh in range(ho):
            ih0 = oh * sh - ph
            for ow in range(wo):
                iw0 = ow * sw - pw
                g = np.float64(gout[co, oh, ow])
                for ci in range(cin):
                    for di in range(kh):
                        ih = ih0 + di
                        if ih < 0 or ih >= h:
                            continue
                        for dj in range(kw):
                            iw = iw0 + dj
                            if iw < 0 or iw >= wd:
                                continue
                            gx[ci, ih, iw] += g * np.float64(w[co, ci, di, dj])
    return gx


@njit(cache=True)
def maxpool_forward(x, k, s, ph, pw):
    c, h, wd = x.shape
    ho = (h + 2 * ph - k) // s + 1
    wo = (wd + 2 * pw - k) // s + 1
    out = np.empty((c, ho, wo), dtype=np.float64)
    idx = np.empty((c, ho, wo), dtype=np.int64)
    for ci in range(c):
        for oh in range(ho):
            ih0 = oh * s - ph
            for ow in range(wo):
                iw0 = ow * s - pw
                best = -np.inf
                besti = -1
                # strict > keeps the first maximum in row-major order,
                # matching np.argmax over the flattened window
                for di in range(k):
                    ih = ih0 + di
                    if ih < 0 or ih >= h:
                        continue
                    for dj in range(k):
                        iw = iw0 + dj
                        if iw < 0 or iw >= wd:
                            continue
                        v = np.float64(x[ci, ih, iw])
                        if v > best:
                            best = v
                            besti = ih * wd + iw
                out[ci, oh, ow] = best
                idx[ci, oh, ow] = besti
    return out, idx


@njit(cache=True)
def maxpool_backward(gout, idx, c, h, wd):
    gx = np.zeros((c, h * wd), dtype=np.float64)
    ho = gout.shape[1]
    wo = gout.shape[2]
    for ci in range(c):
        for oh in range(ho):
            for ow in range(wo):
                gx[ci, idx[ci, oh, ow]] += np.float64(gout[ci, oh, ow])
    return gx.reshape(c, h, wd)


@njit(cache=True)
def avgpool_forward(x, k, s, ph, pw):
    c, h, wd = x.shape
    ho = (h + 2 * ph - k) // s + 1
    wo = (wd + 2 * pw - k) // s + 1
    inv = 1.0 / (k * k)
    out = np.empty((c, ho, wo), dtype=np.float64)
    for ci in range(c):
        for oh in range(ho):
            ih0 = oh * s - ph
            for ow in range(wo):
                iw0 = ow * s - pw
                acc = 0.0
                for di in range(k):
                    ih = ih0 + di
                    if ih < 0 or ih >= h:
                        continue
                    for dj in range(k):
                        iw = iw0 + dj
                        if iw < 0 or iw >= wd:
                            continue
                        acc += np.float64(x[ci, ih, iw])
                out[ci, oh, ow] = acc * inv
    return out


@njit(cache=True)
def avgpool_backward(gout, k, s, ph, pw, c, h, wd):
    ho = gout.shape[1]
    wo = gout.shape[2]
    inv = 1.0 / (k * k)
    gx = np.zeros((c, h, wd), dtype=np.float64)
    for ci in range(c):
        for oh in range(ho):
            ih0 = oh * s - ph
            for ow in range(wo):
                iw0 = ow * s - pw
                g = np.float64(gout[ci, oh, ow]) * inv
                for di in range(k):
                    ih = ih0 + di
                    if ih < 0 or ih >= h:
                        continue
                    for dj in range(k):
                        iw = iw0 + dj
                        if iw < 0 or iw >= wd:
                            continue
                        gx[ci, ih, iw] += g
    return gx
