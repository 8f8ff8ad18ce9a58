"""Linear classifiers on bag-of-words: logistic regression and hinge-loss SGD."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .config import TrainConfig
from .sgd import as_xy, run_sgd

LOGISTIC = "logistic"
HINGE = "hinge"


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    loss: str = LOGISTIC
    config: TrainConfig = field(default_factory=TrainConfig)
    history: list[float] = field(default_factory=list)
    representation = "bow"

    @property
    def family(self) -> str:
        return "logreg" if self.loss == LOGISTIC else "hinge"

    def margin(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict_proba(self, X) -> np.ndarray:
        # hinge margins are squashed the same way so every model scores in [0, 1]
        return expit(self.margin(X))


def logistic_loss_grad(params, X, y, l2):
    """Mean log-loss plus (l2/2)||w||^2, and its gradients."""
    w, b = params["w"], params["b"]
    z = np.asarray(X @ w).ravel() + b[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    dz = (expit(z) - y) / len(y)
    return loss, {"w": np.asarray(X.T @ dz).ravel() + l2 * w, "b": np.array([dz.sum()])}


def hinge_loss_grad(params, X, y, l2):
    """Mean max(0, 1 - y'(w.x + b)) with y' in {-1, +1}, plus (l2/2)||w||^2."""
    w, b = params["w"], params["b"]
    sign = 2.0 * y - 1.0
    z = np.asarray(X @ w).ravel() + b[0]
    slack = 1.0 - sign * z
    loss = float(np.mean(np.maximum(0.0, slack))) + 0.5 * l2 * float(w @ w)
    dz = np.where(slack > 0, -sign, 0.0) / len(y)
    return loss, {"w": np.asarray(X.T @ dz).ravel() + l2 * w, "b": np.array([dz.sum()])}


def _train_linear(X, y, cfg: TrainConfig, kind: str) -> LinearModel:
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    y = np.asarray(y, dtype=np.float64)
    fn = logistic_loss_grad if kind == LOGISTIC else hinge_loss_grad
    params = {"w": np.zeros(X.shape[1]), "b": np.zeros(1)}
    rng = np.random.default_rng(cfg.seed)
    history = run_sgd(
        params,
        lambda p, idx: fn(p, X[idx], y[idx], cfg.l2_penalty),
        lambda p: fn(p, X, y, cfg.l2_penalty)[0],
        X.shape[0], cfg, rng,
    )
    return LinearModel(params["w"], float(params["b"][0]), kind, cfg, history)


def train_logreg(train, cfg: TrainConfig, y=None) -> LinearModel:
    """Logistic regression by seeded minibatch SGD from a zero start.

    ``train`` is a bag-of-words LabeledSet, or a feature matrix when ``y`` is given.
    """
    X, y = as_xy(train, y)
    return _train_linear(X, y, cfg, LOGISTIC)


def train_linear_hinge(train, cfg: TrainConfig, y=None) -> LinearModel:
    X, y = as_xy(train, y)
    return _train_linear(X, y, cfg, HINGE)
