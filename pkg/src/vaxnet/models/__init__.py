"""The eight classifier configurations and a uniform scoring contract."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..features import BOW, SEQ, LabeledSet, bow_matrix
from .config import ForestConfig, TrainConfig, defaults_hash, load_defaults
from .forest import Forest, train_random_forest
from .linear import LinearModel, train_linear_hinge, train_logreg
from .nb import NBModel, train_multinomial_nb
from .neural import NeuralModel, train_feedforward, train_recurrent
from .sgd import TrainingDiverged

# canonical order of the results table
MODEL_NAMES = ("logreg", "rf", "hinge", "nb", "dnn-bow", "dnn-seq", "gru", "lstm")
REPRESENTATION = {
    "logreg": BOW, "rf": BOW, "hinge": BOW, "nb": BOW, "dnn-bow": BOW,
    "dnn-seq": SEQ, "gru": SEQ, "lstm": SEQ,
}

__all__ = [
    "MODEL_NAMES", "REPRESENTATION", "ForestConfig", "TrainConfig", "TrainingDiverged",
    "LinearModel", "NBModel", "Forest", "NeuralModel", "train_model", "predict_scores",
    "predict_score", "n_features", "default_config", "defaults_hash",
    "train_logreg", "train_linear_hinge", "train_multinomial_nb", "train_random_forest",
    "train_feedforward", "train_recurrent",
]


def default_config(name: str, seed: int = 0, overrides: dict | None = None):
    """Defaults-file configuration for model ``name`` with optional overrides."""
    overrides = dict(overrides or {})
    overrides["seed"] = seed
    if name == "rf":
        return ForestConfig.defaults(**overrides)
    if name == "nb":
        return {"alpha": float(overrides.get("alpha", load_defaults()["nb"]["alpha"]))}
    group = "linear" if name in ("logreg", "hinge") else "neural"
    return TrainConfig.defaults(group, **overrides)


def train_model(name: str, train: LabeledSet, cfg=None, seed: int = 0):
    """Train model ``name`` on a vectorized LabeledSet of the matching representation."""
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    if train.representation != REPRESENTATION[name]:
        raise ValueError(f"model {name} needs the {REPRESENTATION[name]} representation, "
                         f"got {train.representation}")
    if cfg is None or isinstance(cfg, dict):
        cfg = default_config(name, seed, cfg)
    if name == "logreg":
        return train_logreg(train, cfg)
    if name == "hinge":
        return train_linear_hinge(train, cfg)
    if name == "nb":
        return train_multinomial_nb(train, **cfg)
    if name == "rf":
        return train_random_forest(train, cfg)
    if name in ("dnn-bow", "dnn-seq"):
        return train_feedforward(train, cfg)
    return train_recurrent(train, name, cfg)


def n_features(model) -> int:
    if isinstance(model, LinearModel):
        return len(model.weights)
    if isinstance(model, NBModel):
        return model.feature_log_prob.shape[1]
    if isinstance(model, Forest):
        return model.n_features
    if model.kind == "dnn-bow":
        return model.params["W0"].shape[0]
    return model.params["E"].shape[0]


def predict_scores(model, data) -> np.ndarray:
    """Scores in [0, 1] for a LabeledSet or a ready matrix of the model's representation."""
    if isinstance(data, LabeledSet):
        if data.representation != model.representation:
            raise ValueError(f"representation mismatch: model wants {model.representation}, "
                             f"data is {data.representation}")
        data = data.matrix()
    if model.representation == BOW and not (sp.issparse(data) or np.asarray(data).dtype.kind == "f"):
        raise ValueError("representation mismatch: bag-of-words model needs a count matrix")
    if model.representation == SEQ and (sp.issparse(data) or np.asarray(data).dtype.kind not in "iu"):
        raise ValueError("representation mismatch: sequence model needs integer token ids")
    return np.clip(model.predict_proba(data), 0.0, 1.0)


def predict_score(model, sample) -> float:
    """Score one sample: a ``{index: count}`` dict for BOW models, a list of ids otherwise."""
    if model.representation == BOW:
        if not isinstance(sample, dict):
            raise ValueError("representation mismatch: bag-of-words model needs an {index: count} mapping")
        X = bow_matrix([sample], n_features(model))
    else:
        if isinstance(sample, dict):
            raise ValueError("representation mismatch: sequence model needs a list of token ids")
        X = np.asarray([sample], dtype=np.int64)
    return float(predict_scores(model, X)[0])
