"""Pure-numpy fallbacks for the hot kernels.

Same contracts as ``numba_kernels``; selected with STITCH_BACKEND=numpy or
automatically when numba is unavailable.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def fft_radix2(x):
    """Unnormalized forward DFT of a power-of-two complex vector (natural order)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = x[rev]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        grp = out.reshape(-1, size)
        odd = grp[:, half:] * tw
        even = grp[:, :half].copy()
        grp[:, :half] = even + odd
        grp[:, half:] = even - odd
        size *= 2
    return out


def _im2col(x, k_w):
    # columns[n, ci, k, l] = x[n, ci, l + k - pad], zero outside
    pad = k_w // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    return sliding_window_view(xp, x.shape[2], axis=2)


def conv1d_fwd(x, w, b):
    """Same-padding 1D convolution over a (N, C_in, L) batch; kernel width odd."""
    n_b, c_in, length = x.shape
    c_out, _, k_w = w.shape
    cols = _im2col(x, k_w).reshape(n_b, c_in * k_w, length)
    y = np.matmul(w.reshape(c_out, c_in * k_w), cols)
    y += b[:, None]
    return y


def conv1d_bwd_input(gy, w):
    """Gradient of conv1d_fwd w.r.t. its input."""
    # convolution of gy with the channel-transposed, tap-flipped kernel
    w_t = np.ascontiguousarray(w[:, :, ::-1].transpose(1, 0, 2))
    zero = np.zeros(w_t.shape[0], dtype=gy.dtype)
    return conv1d_fwd(gy, w_t, zero)


def conv1d_bwd_params(x, gy, k_w):
    """Gradients of conv1d_fwd w.r.t. weights and bias."""
    n_b, c_in, length = x.shape
    c_out = gy.shape[1]
    cols = _im2col(x, k_w).reshape(n_b, c_in * k_w, length)
    gw = np.matmul(gy, cols.transpose(0, 2, 1)).sum(axis=0)
    gb = gy.sum(axis=(0, 2))
    return gw.reshape(c_out, c_in, k_w), gb
