"""Multinomial naive Bayes with additive smoothing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .sgd import as_xy


@dataclass
class NBModel:
    class_log_prior: np.ndarray  # (2,)
    feature_log_prob: np.ndarray  # (2, V)
    alpha: float = 1.0
    family = "nb"
    representation = "bow"

    def joint_log_likelihood(self, X) -> np.ndarray:
        return np.asarray(X @ self.feature_log_prob.T) + self.class_log_prior

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return np.exp(jll[:, 1] - logsumexp(jll, axis=1))


def train_multinomial_nb(train, alpha: float = 1.0, y=None) -> NBModel:
    """Closed-form fit: log P(c) and log((N_ct + alpha) / (N_c + alpha V))."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    X, y = as_xy(train, y)
    n_features = X.shape[1]
    priors, loglik = [], []
    for cls in (0, 1):
        rows = np.flatnonzero(y == cls)
        if len(rows) == 0:
            raise ValueError(f"class {cls} has no training samples")
        counts = np.asarray(X[rows].sum(axis=0)).ravel()
        priors.append(np.log(len(rows) / len(y)))
        loglik.append(np.log(counts + alpha) - np.log(counts.sum() + alpha * n_features))
    return NBModel(np.array(priors), np.vstack(loglik), alpha)
