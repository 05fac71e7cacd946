"""Compiled loops for the 3x3 dilated depthwise convolution.

Single-threaded with a fixed accumulation order, so results are
bit-reproducible. Out-of-range taps read the implicit zero padding and
are skipped.
"""
import numba
import numpy as np


@numba.njit(cache=True)
def depthwise3x3_forward(x, kernel, bias, d):
    L, N, C = x.shape
    out = np.zeros_like(x)
    for l in range(L):
        for n in range(N):
            for i in range(3):
                t = l + (i - 1) * d
                if t < 0 or t >= L:
                    continue
                for j in range(3):
                    f = n + (j - 1) * d
                    if f < 0 or f >= N:
                        continue
                    for c in range(C):
                        out[l, n, c] += x[t, f, c] * kernel[c, i, j]
            for c in range(C):
                out[l, n, c] += bias[c]
    return out


@numba.njit(cache=True)
def depthwise3x3_backward(g, x, kernel, d):
    L, N, C = x.shape
    gx = np.zeros_like(x)
    gk = np.zeros_like(kernel)
    gb = np.zeros(C)
    for l in range(L):
        for n in range(N):
            for c in range(C):
                gb[c] += g[l, n, c]
            for i in range(3):
                t = l + (i - 1) * d
                if t < 0 or t >= L:
                    continue
                for j in range(3):
                    f = n + (j - 1) * d
                    if f < 0 or f >= N:
                        continue
                    for c in range(C):
                        gx[t, f, c] += g[l, n, c] * kernel[c, i, j]
                        gk[c, i, j] += g[l, n, c] * x[t, f, c]
    return gx, gk, gb
