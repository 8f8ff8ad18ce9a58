"""JSON model files: family tag, shapes, parameters, vocabulary and config echo."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..features import Vocabulary
from .config import ForestConfig, TrainConfig, defaults_hash
from .forest import Forest, Tree
from .linear import LinearModel
from .nb import NBModel
from .neural import NeuralModel

FORMAT = "vaxnet-model"
FORMAT_VERSION = 1


def _arr(a) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(d, dtype=np.float64) -> np.ndarray:
    return np.asarray(d["data"], dtype=dtype).reshape(d["shape"])


def model_to_dict(model, vocab: Vocabulary | None = None, meta: dict | None = None) -> dict:
    out = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "representation": model.representation,
        "defaults_hash": defaults_hash(),
        "vocab_hash": vocab.digest() if vocab else None,
        "vocabulary": vocab.tokens() if vocab else None,
        "meta": dict(meta or {}),
    }
    if isinstance(model, LinearModel):
        out["config"] = model.config.to_dict()
        out["params"] = {"w": _arr(model.weights), "b": _arr([model.bias])}
        out["history"] = list(model.history)
    elif isinstance(model, NBModel):
        out["config"] = {"alpha": model.alpha}
        out["params"] = {"class_log_prior": _arr(model.class_log_prior),
                         "feature_log_prob": _arr(model.feature_log_prob)}
    elif isinstance(model, Forest):
        out["config"] = model.config.to_dict()
        out["n_features"] = model.n_features
        out["trees"] = [
            {"feature": t.feature.tolist(), "threshold": t.threshold.tolist(), "left": t.left.tolist(),
             "right": t.right.tolist(), "value": t.value.tolist()}
            for t in model.trees
        ]
    elif isinstance(model, NeuralModel):
        out["config"] = model.config.to_dict()
        out["params"] = {k: _arr(v) for k, v in sorted(model.params.items())}
        out["history"] = list(model.history)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return out


def model_from_dict(d: dict):
    """Inverse of :func:`model_to_dict`; returns ``(model, vocabulary or None, meta)``."""
    if d.get("format") != FORMAT:
        raise ValueError("not a vaxnet model file")
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')}")
    fam = d["family"]
    vocab = None
    if d.get("vocabulary") is not None:
        vocab = Vocabulary({t: i + 2 for i, t in enumerate(d["vocabulary"])})
        if d.get("vocab_hash") and vocab.digest() != d["vocab_hash"]:
            raise ValueError("vocabulary does not match its recorded hash")
    if fam in ("logreg", "hinge"):
        p = d["params"]
        model = LinearModel(_unarr(p["w"]), float(_unarr(p["b"])[0]),
                            "logistic" if fam == "logreg" else "hinge",
                            TrainConfig.from_dict(d["config"]), list(d.get("history", [])))
    elif fam == "nb":
        p = d["params"]
        model = NBModel(_unarr(p["class_log_prior"]), _unarr(p["feature_log_prob"]), d["config"]["alpha"])
    elif fam == "rf":
        trees = [
            Tree(np.asarray(t["feature"], dtype=np.int64), np.asarray(t["threshold"], dtype=np.float64),
                 np.asarray(t["left"], dtype=np.int64), np.asarray(t["right"], dtype=np.int64),
                 np.asarray(t["value"], dtype=np.float64))
            for t in d["trees"]
        ]
        model = Forest(trees, ForestConfig.from_dict(d["config"]), int(d["n_features"]))
    elif fam in ("dnn-bow", "dnn-seq", "gru", "lstm"):
        params = {k: _unarr(v) for k, v in d["params"].items()}
        model = NeuralModel(fam, params, TrainConfig.from_dict(d["config"]), list(d.get("history", [])))
    else:
        raise ValueError(f"unknown model family {fam!r}")
    return model, vocab, dict(d.get("meta", {}))


def save_model(model, path, vocab: Vocabulary | None = None, meta: dict | None = None) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, vocab, meta), fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(Path(path), encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(d)
