"""Training loop: MAE loss, Adam with decoupled weight decay, global-norm
gradient clipping, validation-based early stopping.

Everything is deterministic for a fixed seed: batch order comes from a seeded
generator and reduction order is fixed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .model import ParameterSet, backward_batch, forward_batch, no_decay

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    clip_norm: float = 5.0
    batch_size: int = 16
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ConfigError("learning_rate and clip_norm must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be >= 1")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")


@dataclass
class TrainReport:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0          # 1-based
    stopping_reason: str = ""
    epoch_seconds: list = field(default_factory=list)

    @property
    def best_val_loss(self) -> float:
        return min(self.val_losses) if self.val_losses else math.inf

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "best_epoch": self.best_epoch,
            "stopping_reason": self.stopping_reason,
            "epoch_seconds": self.epoch_seconds,
        }


def mae_loss(pred, target) -> float:
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def mae_loss_grad(pred, target):
    """(loss, d_loss/d_pred) for the mean absolute error."""
    diff = pred - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad


def global_norm(grads: dict) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return math.sqrt(total)


def clip_gradients(grads: dict, clip_norm: float) -> dict:
    """Scale all gradients so the global L2 norm is at most clip_norm."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    norm = global_norm(grads)
    if norm > clip_norm:
        scale = clip_norm / norm
        for g in grads.values():
            g *= scale
    return grads


@dataclass
class AdamState:
    m: dict
    v: dict

    @classmethod
    def zeros_like(cls, params: ParameterSet) -> "AdamState":
        return cls(m={k: np.zeros_like(a) for k, a in params.arrays.items()},
                   v={k: np.zeros_like(a) for k, a in params.arrays.items()})


def adam_step(params: ParameterSet, grads: dict, state: AdamState, t: int,
              config: TrainConfig) -> None:
    """In-place Adam update with bias correction and decoupled weight decay.

    Weight decay shrinks parameters directly (theta -= lr*wd*theta) and skips
    the positional embedding and layer-norm gains/biases.
    """
    if t < 1:
        raise ValueError("step counter t must be >= 1")
    lr = config.learning_rate
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, theta in params.arrays.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        theta -= lr * update
        if config.weight_decay > 0 and not no_decay(name):
            theta -= lr * config.weight_decay * theta


def _dataset_mae(x, y, params, mask, batch_size) -> float:
    total = 0.0
    count = 0
    for start in range(0, x.shape[0], batch_size):
        preds, _, _ = forward_batch(x[start:start + batch_size], params, mask=mask)
        batch_y = y[start:start + batch_size]
        total += float(np.abs(preds - batch_y).sum())
        count += batch_y.size
    return total / count


def train(params: ParameterSet, train_data, val_data, config: TrainConfig,
          mask=None, log=None) -> tuple[ParameterSet, TrainReport]:
    """Optimize `params` in place; return (best-validation copy, report).

    train_data/val_data are (X, Y) arrays shaped (S, m, N, C) / (S, n, N) in
    normalized space. `log` is called as log(epoch, train_mae, val_mae,
    seconds) after every epoch.
    """
    x_train, y_train = train_data
    x_val, y_val = val_data
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise DataError("training and validation sets must be non-empty")
    samples = x_train.shape[0]
    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros_like(params)
    report = TrainReport()
    best_params = params.copy()
    best_val = math.inf
    bad_epochs = 0
    t = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(samples) if config.shuffle else np.arange(samples)
        loss_sum = 0.0
        for start in range(0, samples, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            preds, caches, _ = forward_batch(xb, params, mask=mask)
            loss, d_preds = mae_loss_grad(preds, yb)
            loss_sum += loss * len(idx)
            grads, _ = backward_batch(caches, params, d_preds)
            clip_gradients(grads, config.clip_norm)
            t += 1
            adam_step(params, grads, state, t, config)
            for name, arr in params.arrays.items():
                if not np.all(np.isfinite(arr)):
                    raise NumericError(
                        f"parameter {name!r} became non-finite at epoch {epoch}, "
                        f"step {t}")
        train_mae = loss_sum / samples
        val_mae = _dataset_mae(x_val, y_val, params, mask, config.batch_size)
        elapsed = time.perf_counter() - started
        report.train_losses.append(train_mae)
        report.val_losses.append(val_mae)
        report.epoch_seconds.append(elapsed)
        if log is not None:
            log(epoch, train_mae, val_mae, elapsed)
        if val_mae < best_val:
            best_val = val_mae
            report.best_epoch = epoch
            best_params = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                report.stopping_reason = "early_stopping"
                break
    if not report.stopping_reason:
        report.stopping_reason = "max_epochs"
    return best_params, report
