"""Hot numeric kernels compiled with numba.

All functions mirror the signatures in ``numpy_kernels``; the package picks
one implementation at import time (see ``specstitch.accel``).
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _fft_inplace(x):
    """Iterative radix-2 decimation-in-time FFT, unnormalized, in natural order.

    ``x`` is complex128, length a power of two, and is overwritten.
    """
    n = x.shape[0]
    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            tmp = x[i]
            x[i] = x[j]
            x[j] = tmp
    size = 2
    while size <= n:
        half = size >> 1
        tw = np.empty(half, np.complex128)
        for k in range(half):
            ang = -2.0 * math.pi * k / size
            tw[k] = complex(math.cos(ang), math.sin(ang))
        for start in range(0, n, size):
            for k in range(half):
                a = x[start + k]
                b = x[start + half + k] * tw[k]
                x[start + k] = a + b
                x[start + half + k] = a - b
        size <<= 1


def fft_radix2(x):
    """Unnormalized forward DFT of a power-of-two complex vector (natural order)."""
    out = np.array(x, dtype=np.complex128, copy=True)
    _fft_inplace(out)
    return out


@njit(cache=True)
def _im2col(x, k_w):
    # cols[n, ci*k_w + k, l] = x[n, ci, l + k - pad], zero outside
    n_b, c_in, length = x.shape
    pad = k_w // 2
    cols = np.zeros((n_b, c_in * k_w, length), x.dtype)
    for n in range(n_b):
        for ci in range(c_in):
            for k in range(k_w):
                off = k - pad
                lo = max(0, -off)
                hi = min(length, length - off)
                dst = cols[n, ci * k_w + k]
                src = x[n, ci]
                for l in range(lo, hi):
                    dst[l] = src[l + off]
    return cols


@njit(cache=True)
def _conv1d_fwd(x, w, b):
    n_b, c_in, length = x.shape
    c_out, _, k_w = w.shape
    cols = _im2col(x, k_w)
    w2 = np.ascontiguousarray(w.reshape(c_out, c_in * k_w))
    y = np.empty((n_b, c_out, length), x.dtype)
    for n in range(n_b):
        y[n] = np.dot(w2, cols[n])
        for co in range(c_out):
            row = y[n, co]
            for l in range(length):
                row[l] += b[co]
    return y


@njit(cache=True)
def _conv1d_bwd_input(gy, w_t):
    # same contraction as forward against the tap-flipped transposed kernel
    n_b = gy.shape[0]
    c_in = w_t.shape[0]
    length = gy.shape[2]
    k_w = w_t.shape[2]
    cols = _im2col(gy, k_w)
    w2 = np.ascontiguousarray(w_t.reshape(c_in, w_t.shape[1] * k_w))
    gx = np.empty((n_b, c_in, length), gy.dtype)
    for n in range(n_b):
        gx[n] = np.dot(w2, cols[n])
    return gx


@njit(cache=True)
def _conv1d_bwd_params(x, gy, k_w):
    n_b, c_in, length = x.shape
    c_out = gy.shape[1]
    cols = _im2col(x, k_w)
    gw2 = np.zeros((c_out, c_in * k_w), x.dtype)
    gb = np.zeros(c_out, x.dtype)
    for n in range(n_b):
        gw2 += np.dot(gy[n], cols[n].T)
        for co in range(c_out):
            gr = gy[n, co]
            s = gr[0] * 0
            for l in range(length):
                s += gr[l]
            gb[co] += s
    return gw2.reshape(c_out, c_in, k_w).copy(), gb


def conv1d_fwd(x, w, b):
    """Same-padding 1D convolution over a (N, C_in, L) batch; kernel width odd."""
    return _conv1d_fwd(np.ascontiguousarray(x), np.ascontiguousarray(w), b)


def conv1d_bwd_input(gy, w):
    """Gradient of conv1d_fwd w.r.t. its input."""
    w_t = np.ascontiguousarray(w[:, :, ::-1].transpose(1, 0, 2))
    return _conv1d_bwd_input(np.ascontiguousarray(gy), w_t)


def conv1d_bwd_params(x, gy, k_w):
    """Gradients of conv1d_fwd w.r.t. weights and bias."""
    return _conv1d_bwd_params(np.ascontiguousarray(x), np.ascontiguousarray(gy), k_w)
