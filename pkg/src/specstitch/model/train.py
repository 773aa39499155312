"""Mini-batch SGD with momentum."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    batch_size: int
    epochs: int
    seed: int = 0
    momentum: float = 0.9


@dataclass
class TrainResult:
    loss_trace: list  # one value per batch, in order
    epochs: int

    @property
    def final_loss(self):
        return self.loss_trace[-1]


def train(net, inputs, labels, hyper: TrainConfig) -> TrainResult:
    """Train in place. Batch order is a seed-deterministic shuffle per epoch;
    batch-norm running statistics update with momentum 0.1 during forward."""
    count = inputs.shape[0]
    if count == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(hyper.seed)
    velocity = {name: np.zeros_like(p) for name, p, _ in net.grads()}
    trace = []
    for _ in range(hyper.epochs):
        order = rng.permutation(count)
        for start in range(0, count, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            value = net.train_step_grads(inputs[idx], labels[idx])
            trace.append(value)
            for name, p, g in net.grads():
                v = velocity[name]
                v *= hyper.momentum
                v += g
                p -= hyper.lr * v
    return TrainResult(trace, hyper.epochs)
