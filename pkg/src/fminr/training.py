"""MSE loss, Adam, step learning-rate decay and the epoch loop."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .network import Model, backward, forward
from .numerics import Rng, ShapeError


class DivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 500
    lr_decay_gamma: float = 0.1
    lr_decay_every: int = 100
    batch_size: int | str = "full"
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_decay_gamma <= 1:
            raise ValueError("lr_decay_gamma must lie in (0, 1]")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be positive")
        if self.batch_size != "full" and int(self.batch_size) < 1:
            raise ValueError("batch_size must be 'full' or a positive count")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass
class RunReport:
    losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    redundancy: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")

    @property
    def wall_time(self) -> float:
        return float(sum(self.seconds))

    def history_rows(self):
        for i, (lr, loss, sec) in enumerate(zip(self.lrs, self.losses, self.seconds)):
            yield {"epoch": i, "lr": lr, "loss": loss, "seconds": sec}


def mse_loss(pred, target):
    """Mean squared error over all elements and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.sum(diff * diff) / n), (2.0 / n) * diff


def adam_step(state: AdamState, params, grads, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {p.shape} vs gradient {g.shape}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def scheduled_lr(config: TrainConfig, epoch: int) -> float:
    """Step decay: the base rate times gamma for every completed decay period."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return config.learning_rate * config.lr_decay_gamma ** (epoch // config.lr_decay_every)


def train(model: Model, dataset, config: TrainConfig, log=None):
    """Fit ``model`` to ``dataset`` (needs ``coords`` and ``targets``)."""
    coords = np.asarray(dataset.coords, dtype=np.float64)
    targets = np.asarray(dataset.targets, dtype=np.float64)
    if coords.shape[1] != model.input_dim or targets.shape[1] != model.output_dim:
        raise ShapeError(
            f"dataset {coords.shape}->{targets.shape} does not fit model "
            f"{model.input_dim}->{model.output_dim}"
        )
    n = coords.shape[0]
    full = config.batch_size == "full" or int(config.batch_size) >= n
    rng = Rng(config.seed)
    params = model.params()
    state = AdamState.zeros_like(params)
    report = RunReport()

    for epoch in range(config.epochs):
        start = time.perf_counter()
        lr = scheduled_lr(config, epoch)
        if full:
            batches = [slice(None)]
        else:
            order = rng.permutation(n)
            bs = int(config.batch_size)
            batches = [order[i:i + bs] for i in range(0, n, bs)]
        total = 0.0
        for idx in batches:
            x, y = coords[idx], targets[idx]
            cache = forward(model, x)
            loss, dout = mse_loss(cache.output, y)
            if not math.isfinite(loss):
                raise DivergedError(epoch, loss)
            grads = backward(model, cache, dout)
            adam_step(state, params, grads, lr, config.adam_beta1, config.adam_beta2,
                      config.adam_eps)
            model.touch()
            total += loss * x.shape[0]
        epoch_loss = total / n
        report.losses.append(epoch_loss)
        report.lrs.append(lr)
        report.seconds.append(time.perf_counter() - start)
        if log is not None:
            log(epoch, epoch_loss)
    return model, report
