"""Network building blocks with explicit forward/backward.

All activations are (N, C, L) arrays. Each layer caches what its backward
needs, writes parameter gradients into its ``g*`` attributes, and returns
the input gradient. One backward per forward; gradients are assigned, not
accumulated.
"""

import numpy as np

from .. import accel


def _fan_in_uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape).astype(dtype)


class Conv1d:
    """Same-padding 1D convolution, odd kernel width."""

    param_names = ("w", "b")
    state_names = ()

    def __init__(self, c_in, c_out, k, rng, dtype):
        self.k = k
        self.w = _fan_in_uniform(rng, (c_out, c_in, k), c_in * k, dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    def forward(self, x, train=False):
        x = x.astype(self.w.dtype, copy=False)
        self._x = x
        return accel.conv1d_fwd(x, self.w, self.b)

    def backward(self, gy):
        gw, gb = accel.conv1d_bwd_params(self._x, gy, self.k)
        self.gw = gw.astype(self.w.dtype, copy=False)
        self.gb = gb.astype(self.b.dtype, copy=False)
        return accel.conv1d_bwd_input(gy, self.w)


class BatchNorm1d:
    """Per-channel batch normalization over (N, L).

    Running statistics hold the same biased variance used for
    normalization and are refreshed with momentum 0.1 only when a training
    forward asks for it (update_stats), so repeated loss probes do not
    drift the state.
    """

    param_names = ("gamma", "beta")
    state_names = ("running_mean", "running_var")
    momentum = 0.1
    eps = 1e-5

    def __init__(self, c, dtype):
        self.gamma = np.ones(c, dtype=dtype)
        self.beta = np.zeros(c, dtype=dtype)
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)

    def forward(self, x, train=False, update_stats=False):
        if train:
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            if update_stats:
                m = self.momentum
                self.running_mean = ((1 - m) * self.running_mean + m * mean).astype(x.dtype)
                self.running_var = ((1 - m) * self.running_var + m * var).astype(x.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[:, None]) * inv_std[:, None]
        self._train = train
        self._xhat = xhat
        self._inv_std = inv_std
        return self.gamma[:, None] * xhat + self.beta[:, None]

    def backward(self, gy):
        xhat = self._xhat
        self.ggamma = (gy * xhat).sum(axis=(0, 2)).astype(self.gamma.dtype)
        self.gbeta = gy.sum(axis=(0, 2)).astype(self.beta.dtype)
        coeff = (self.gamma * self._inv_std)[:, None]
        if not self._train:
            return gy * coeff
        m = gy.shape[0] * gy.shape[2]
        gy_sum = gy.sum(axis=(0, 2), keepdims=True)
        proj = (gy * xhat).sum(axis=(0, 2), keepdims=True)
        return coeff * (gy - gy_sum / m - xhat * proj / m)


class ReLU:
    # outputs are computed from locals so concurrent eval forwards on a
    # shared net stay correct; only the backward caches are racy
    param_names = ()
    state_names = ()

    def forward(self, x, train=False):
        mask = x > 0
        self._mask = mask
        return x * mask

    def backward(self, gy):
        return gy * self._mask


class MaxPool2:
    """Halve the spatial length, keeping the larger of each adjacent pair."""

    param_names = ()
    state_names = ()

    def forward(self, x, train=False):
        pairs = x.reshape(x.shape[0], x.shape[1], -1, 2)
        left_wins = pairs[..., 0] >= pairs[..., 1]
        self._left_wins = left_wins
        return np.where(left_wins, pairs[..., 0], pairs[..., 1])

    def backward(self, gy):
        gx = np.zeros(gy.shape[:2] + (gy.shape[2] * 2,), dtype=gy.dtype)
        pairs = gx.reshape(gy.shape[0], gy.shape[1], -1, 2)
        pairs[..., 0] = np.where(self._left_wins, gy, 0)
        pairs[..., 1] = np.where(self._left_wins, 0, gy)
        return gx


class UpsampleNN2:
    """Nearest-neighbor x2 along the spatial axis."""

    param_names = ()
    state_names = ()

    def forward(self, x, train=False):
        return np.repeat(x, 2, axis=2)

    def backward(self, gy):
        return gy.reshape(gy.shape[0], gy.shape[1], -1, 2).sum(axis=3)


class Sigmoid:
    param_names = ()
    state_names = ()

    def forward(self, x, train=False):
        y = 1.0 / (1.0 + np.exp(-x))
        self._y = y
        return y

    def backward(self, gy):
        return gy * self._y * (1.0 - self._y)


class NonLocalBlock:
    """Self-attention over spatial positions: softmax(Q K^T / sqrt(d)) V,
    with 1x1 projections for Q, K, V and the output, and an optional
    residual connection around the block."""

    state_names = ()

    def __init__(self, c, d, rng, dtype, residual=True):
        self.d = d
        self.residual = residual
        self.wq = Conv1d(c, d, 1, rng, dtype)
        self.wk = Conv1d(c, d, 1, rng, dtype)
        self.wv = Conv1d(c, c, 1, rng, dtype)
        self.wo = Conv1d(c, c, 1, rng, dtype)

    def sublayers(self):
        return (("q", self.wq), ("k", self.wk), ("v", self.wv), ("o", self.wo))

    def forward(self, x, train=False):
        q = self.wq.forward(x)
        k = self.wk.forward(x)
        v = self.wv.forward(x)
        scores = np.matmul(q.transpose(0, 2, 1), k) / float(np.sqrt(self.d))
        scores -= scores.max(axis=2, keepdims=True)
        e = np.exp(scores)
        att = e / e.sum(axis=2, keepdims=True)
        mixed = np.matmul(v, att.transpose(0, 2, 1))
        y = self.wo.forward(mixed)
        self._q, self._k, self._v, self._att = q, k, v, att
        self.last_attention = att
        if self.residual:
            return x + y
        return y

    def backward(self, gy):
        gmixed = self.wo.backward(gy)
        q, k, v, att = self._q, self._k, self._v, self._att
        gv = np.matmul(gmixed, att)
        gatt = np.matmul(gmixed.transpose(0, 2, 1), v)
        # softmax rows, then the 1/sqrt(d) score scaling
        inner = (gatt * att).sum(axis=2, keepdims=True)
        gscores = att * (gatt - inner) / float(np.sqrt(self.d))
        gq = np.matmul(k, gscores.transpose(0, 2, 1))
        gk = np.matmul(q, gscores)
        gx = self.wv.backward(gv)
        gx = gx + self.wq.backward(gq)
        gx = gx + self.wk.backward(gk)
        if self.residual:
            gx = gx + gy
        return gx
