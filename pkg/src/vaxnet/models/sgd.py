"""Minibatch SGD shared by the gradient-trained models."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .config import TrainConfig


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float | None) -> None:
    if max_norm is None:
        return
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale


def run_sgd(
    params: dict[str, np.ndarray],
    loss_grad: Callable[[dict, np.ndarray], tuple[float, dict]],
    full_loss: Callable[[dict], float],
    n: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Train ``params`` in place; returns the training loss after each epoch.

    ``loss_grad(params, batch_idx)`` gives the batch loss and gradients.
    """
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grads = loss_grad(params, batch)
            clip_by_global_norm(grads, cfg.max_grad_norm)
            for k, g in grads.items():
                if cfg.momentum:
                    velocity[k] *= cfg.momentum
                    velocity[k] -= cfg.learning_rate * g
                    params[k] += velocity[k]
                else:
                    params[k] -= cfg.learning_rate * g
        loss = full_loss(params)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(p)) for p in params.values()):
            raise TrainingDiverged(epoch, loss)
        history.append(loss)
    return history


def as_xy(train, y=None):
    """Accept either a LabeledSet or an explicit (matrix, labels) pair."""
    if y is None:
        return train.matrix(), np.asarray(train.labels)
    return train, np.asarray(y)
