"""1D multi-label segmentation network.

Five encoder blocks (two 3-wide convs + batch norm + ReLU, then maxpool /2),
five decoder blocks (nearest-neighbor upsample + conv, skip concatenation,
two convs + batch norm + ReLU), one self-attention block between the last
decoder and the head, and a 1-wide conv head with per-entry logistic output.
Each output entry is an independent class probability; columns are never
normalized against each other, so overlapping signals can label the same bin
in several rows.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DivergedLoss, ShapeMismatch
from .layers import BatchNorm1d, Conv1d, MaxPool2, NonLocalBlock, ReLU, Sigmoid, UpsampleNN2

LOSS_CLAMP = 1e-7


@dataclass(frozen=True)
class SegNetConfig:
    n_iq: int
    C: int
    widths: tuple = (8, 16, 32, 64, 128)
    nonlocal_dim: int = 0  # 0 means widths[0] // 2
    use_nonlocal: bool = True
    nonlocal_residual: bool = True

    def __post_init__(self):
        if self.n_iq % 32:
            raise ValueError("n_iq must be divisible by 32 (five pooling stages)")
        if len(self.widths) != 5 or any(
            b <= a for a, b in zip(self.widths, self.widths[1:])
        ):
            raise ValueError("widths must be 5 strictly increasing channel counts")
        if self.C < 1:
            raise ValueError("C must be >= 1")

    @property
    def attention_dim(self):
        return self.nonlocal_dim if self.nonlocal_dim > 0 else max(1, self.widths[0] // 2)


class _EncoderBlock:
    def __init__(self, c_in, c_out, rng, dtype):
        self.conv_a = Conv1d(c_in, c_out, 3, rng, dtype)
        self.bn_a = BatchNorm1d(c_out, dtype)
        self.relu_a = ReLU()
        self.conv_b = Conv1d(c_out, c_out, 3, rng, dtype)
        self.bn_b = BatchNorm1d(c_out, dtype)
        self.relu_b = ReLU()
        self.pool = MaxPool2()

    def sublayers(self):
        return (("convA", self.conv_a), ("bnA", self.bn_a), ("convB", self.conv_b),
                ("bnB", self.bn_b))

    def forward(self, x, train, update_stats):
        h = self.relu_a.forward(self.bn_a.forward(self.conv_a.forward(x), train, update_stats))
        skip = self.relu_b.forward(self.bn_b.forward(self.conv_b.forward(h), train, update_stats))
        return skip, self.pool.forward(skip)

    def backward(self, gskip, gpooled):
        g = self.pool.backward(gpooled) + gskip
        g = self.conv_b.backward(self.bn_b.backward(self.relu_b.backward(g)))
        return self.conv_a.backward(self.bn_a.backward(self.relu_a.backward(g)))


class _DecoderBlock:
    def __init__(self, c_prev, c_skip, rng, dtype):
        self.c_skip = c_skip
        self.up = UpsampleNN2()
        self.conv_up = Conv1d(c_prev, c_skip, 3, rng, dtype)
        self.conv_a = Conv1d(2 * c_skip, c_skip, 3, rng, dtype)
        self.bn_a = BatchNorm1d(c_skip, dtype)
        self.relu_a = ReLU()
        self.conv_b = Conv1d(c_skip, c_skip, 3, rng, dtype)
        self.bn_b = BatchNorm1d(c_skip, dtype)
        self.relu_b = ReLU()

    def sublayers(self):
        return (("convUp", self.conv_up), ("convA", self.conv_a), ("bnA", self.bn_a),
                ("convB", self.conv_b), ("bnB", self.bn_b))

    def forward(self, x, skip, train, update_stats):
        up = self.conv_up.forward(self.up.forward(x))
        h = np.concatenate([skip, up], axis=1)
        h = self.relu_a.forward(self.bn_a.forward(self.conv_a.forward(h), train, update_stats))
        return self.relu_b.forward(self.bn_b.forward(self.conv_b.forward(h), train, update_stats))

    def backward(self, gy):
        g = self.conv_b.backward(self.bn_b.backward(self.relu_b.backward(gy)))
        g = self.conv_a.backward(self.bn_a.backward(self.relu_a.backward(g)))
        gskip = g[:, : self.c_skip]
        gup = g[:, self.c_skip :]
        gx = self.up.backward(self.conv_up.backward(gup))
        return gx, gskip


class SegNet:
    """The network plus its train/eval mode flag."""

    def __init__(self, cfg: SegNetConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        w = cfg.widths
        self.encoders = []
        c_in = 2
        for c_out in w:
            self.encoders.append(_EncoderBlock(c_in, c_out, rng, self.dtype))
            c_in = c_out
        self.decoders = []
        c_prev = w[-1]
        for c_skip in reversed(w):
            self.decoders.append(_DecoderBlock(c_prev, c_skip, rng, self.dtype))
            c_prev = c_skip
        self.nonlocal_block = (
            NonLocalBlock(w[0], cfg.attention_dim, rng, self.dtype, cfg.nonlocal_residual)
            if cfg.use_nonlocal
            else None
        )
        self.head = Conv1d(w[0], cfg.C, 1, rng, self.dtype)
        self.out_sigmoid = Sigmoid()

    # -- structure traversal ------------------------------------------------

    def named_layers(self):
        """Fixed traversal order; defines the checkpoint tensor order."""
        for i, enc in enumerate(self.encoders):
            for name, layer in enc.sublayers():
                yield f"enc{i}.{name}", layer
        for i, dec in enumerate(self.decoders):
            for name, layer in dec.sublayers():
                yield f"dec{i}.{name}", layer
        if self.nonlocal_block is not None:
            for name, layer in self.nonlocal_block.sublayers():
                yield f"nonlocal.{name}", layer
        yield "head", self.head

    def named_tensors(self):
        """(name, array, kind) for every parameter and running statistic."""
        for lname, layer in self.named_layers():
            for p in layer.param_names:
                yield f"{lname}.{p}", getattr(layer, p), "param"
            for s in layer.state_names:
                yield f"{lname}.{s}", getattr(layer, s), "state"

    def param_count(self):
        return sum(a.size for _, a, kind in self.named_tensors() if kind == "param")

    def grads(self):
        for lname, layer in self.named_layers():
            for p in layer.param_names:
                yield f"{lname}.{p}", getattr(layer, p), getattr(layer, "g" + p)

    # -- forward / loss / backward -------------------------------------------

    def _as_batch(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1] != 2 or x.shape[2] != self.cfg.n_iq:
            raise ShapeMismatch(
                f"expected input (N, 2, {self.cfg.n_iq}), got {x.shape}"
            )
        return x

    def forward(self, x, train=False, update_stats=None):
        """Per-class probability grid, shape (N, C, n_iq) (or (C, n_iq) for a
        single 2D input)."""
        squeeze = np.asarray(x).ndim == 2
        x = self._as_batch(x)
        if update_stats is None:
            update_stats = train
        h = x
        skips = []
        for enc in self.encoders:
            skip, h = enc.forward(h, train, update_stats)
            skips.append(skip)
        for dec, skip in zip(self.decoders, reversed(skips)):
            h = dec.forward(h, skip, train, update_stats)
        if self.nonlocal_block is not None:
            h = self.nonlocal_block.forward(h, train)
        probs = self.out_sigmoid.forward(self.head.forward(h))
        return probs[0] if squeeze else probs

    def loss(self, pred, label):
        """Mean binary cross-entropy over every (class, bin) entry, with
        probabilities clamped to [1e-7, 1 - 1e-7]."""
        pred = np.asarray(pred)
        label = np.asarray(label)
        if pred.shape != label.shape:
            raise ShapeMismatch(f"pred {pred.shape} vs label {label.shape}")
        p = np.clip(pred, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
        l = label.astype(p.dtype)
        return float(np.mean(-(l * np.log(p) + (1.0 - l) * np.log(1.0 - p))))

    def loss_grad(self, pred, label):
        """d loss / d pred, honoring the clamp (zero outside it)."""
        p = np.clip(pred, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
        l = label.astype(p.dtype)
        g = (-l / p + (1.0 - l) / (1.0 - p)) / p.size
        inside = (pred >= LOSS_CLAMP) & (pred <= 1.0 - LOSS_CLAMP)
        return (g * inside).astype(pred.dtype)

    def backward(self, gprobs):
        """Backpropagate d loss / d probs through the whole network; fills
        every layer's parameter gradients and returns d loss / d input."""
        g = self.out_sigmoid.backward(np.asarray(gprobs, dtype=self.dtype))
        if g.ndim == 2:
            g = g[None]
        g = self.head.backward(g)
        if self.nonlocal_block is not None:
            g = self.nonlocal_block.backward(g)
        gskips = []  # decoder 4 pairs with encoder 0, so this builds 0..4
        for dec in reversed(self.decoders):
            g, gskip = dec.backward(g)
            gskips.append(gskip)
        for enc, gskip in zip(reversed(self.encoders), reversed(gskips)):
            g = enc.backward(gskip, g)
        return g

    def train_step_grads(self, x, label):
        """Forward in train mode (updating batch-norm running stats), then
        backward; returns the batch loss."""
        probs = self.forward(x, train=True)
        value = self.loss(probs, label)
        if np.isnan(value):
            raise DivergedLoss("training loss is NaN")
        self.backward(self.loss_grad(probs, label))
        return value
