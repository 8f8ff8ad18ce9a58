"""Neural classifiers with hand-written backpropagation.

Four kinds share one parameter-dict layout and a sigmoid output head:

* ``dnn-bow``: L2-normalized counts -> ReLU dense stack -> head
* ``dnn-seq``: embedding -> mean over non-padding positions -> ReLU stack -> head
* ``gru`` / ``lstm``: embedding -> gated recurrence over the non-padding
  prefix -> final hidden state -> head

All arithmetic is float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..features import BOW, PAD, SEQ
from .config import TrainConfig
from .sgd import as_xy, run_sgd

FEEDFORWARD_KINDS = ("dnn-bow", "dnn-seq")
RECURRENT_KINDS = ("gru", "lstm")
_GATES = {"gru": 3, "lstm": 4}


@dataclass
class NeuralModel:
    kind: str
    params: dict[str, np.ndarray]
    config: TrainConfig = field(default_factory=TrainConfig)
    history: list[float] = field(default_factory=list)

    @property
    def family(self) -> str:
        return self.kind

    @property
    def representation(self) -> str:
        return BOW if self.kind == "dnn-bow" else SEQ

    def logits(self, X) -> np.ndarray:
        return forward(self.kind, self.params, X)

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.logits(X))


def _penalized(name: str) -> bool:
    return name[0] in "WUvE"


def _l2(params, l2):
    return 0.5 * l2 * sum(float(np.sum(p * p)) for k, p in params.items() if _penalized(k))


def _uniform(rng, shape, fan_in, gain=1.0):
    s = gain / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def init_params(kind: str, n_features: int, cfg: TrainConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    p: dict[str, np.ndarray] = {}
    d = cfg.embedding_dim
    if kind in FEEDFORWARD_KINDS:
        if not cfg.hidden_dims:
            raise ValueError("feedforward models need at least one hidden layer")
        fan = n_features
        if kind == "dnn-seq":
            p["E"] = _uniform(rng, (n_features, d), d)
            fan = d
        for i, h in enumerate(cfg.hidden_dims):
            p[f"W{i}"] = _uniform(rng, (fan, h), fan, gain=np.sqrt(6.0))
            p[f"b{i}"] = np.zeros(h)
            fan = h
        p["v"] = _uniform(rng, (fan,), fan)
    elif kind in RECURRENT_KINDS:
        if not cfg.hidden_dims or cfg.hidden_dims[0] < 1 or d < 1:
            raise ValueError("recurrent models need embedding_dim >= 1 and a hidden size >= 1")
        h, g = cfg.hidden_dims[0], _GATES[kind]
        p["E"] = _uniform(rng, (n_features, d), d)
        p["W"] = _uniform(rng, (d, g * h), d)
        p["U"] = _uniform(rng, (h, g * h), h)
        p["b"] = np.zeros(g * h)
        if kind == "lstm":
            p["b"][h:2 * h] = 1.0  # forget gate starts open
        p["v"] = _uniform(rng, (h,), h)
    else:
        raise ValueError(f"unknown neural model kind {kind!r}")
    p["c"] = np.zeros(1)
    return p


def _normalize_rows(X) -> sp.csr_matrix:
    X = sp.csr_matrix(X, dtype=np.float64)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.csr_matrix(sp.diags(1.0 / norms) @ X)


def _n_layers(params) -> int:
    return sum(1 for k in params if k[0] == "W" and k[1:].isdigit())


def _feedforward(kind, params, X, y=None, l2=0.0):
    if kind == "dnn-bow":
        h0 = _normalize_rows(X)
    else:
        ids = np.asarray(X, dtype=np.int64)
        mask = ids != PAD
        count = np.maximum(mask.sum(axis=1, keepdims=True), 1)
        h0 = (params["E"][ids] * mask[..., None]).sum(axis=1) / count
    hs, pre = [h0], []
    h = h0
    for i in range(_n_layers(params)):
        a = np.asarray(h @ params[f"W{i}"]) + params[f"b{i}"]
        pre.append(a)
        h = np.maximum(a, 0.0)
        hs.append(h)
    z = h @ params["v"] + params["c"][0]
    if y is None:
        return z

    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + _l2(params, l2)
    dz = (expit(z) - y) / len(y)
    grads = {"v": h.T @ dz + l2 * params["v"], "c": np.array([dz.sum()])}
    dh = np.outer(dz, params["v"])
    for i in reversed(range(len(pre))):
        da = dh * (pre[i] > 0)
        W = params[f"W{i}"]
        grads[f"W{i}"] = np.asarray(hs[i].T @ da) + l2 * W
        grads[f"b{i}"] = da.sum(axis=0)
        if i > 0 or kind == "dnn-seq":
            dh = da @ W.T
    if kind == "dnn-seq":
        d_emb = (dh / count)[:, None, :] * mask[..., None]
        dE = np.zeros_like(params["E"])
        np.add.at(dE, ids[mask], d_emb[mask])
        grads["E"] = dE + l2 * params["E"]
    return loss, grads


def _recurrent(kind, params, X, y=None, l2=0.0):
    ids = np.asarray(X, dtype=np.int64)
    if ids.ndim != 2:
        raise ValueError("recurrent models expect a 2-D array of token ids")
    mask = (ids != PAD).astype(np.float64)
    steps = int((ids != PAD).sum(axis=1).max()) if ids.size else 0
    E, W, U, b = params["E"], params["W"], params["U"], params["b"]
    H = U.shape[0]
    B = ids.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(steps):
        x = E[ids[:, t]]
        m = mask[:, t:t + 1]
        if kind == "gru":
            gx = x @ W + b
            gh = h @ U[:, :2 * H]
            zg = expit(gx[:, :H] + gh[:, :H])
            r = expit(gx[:, H:2 * H] + gh[:, H:])
            rh = r * h
            n = np.tanh(gx[:, 2 * H:] + rh @ U[:, 2 * H:])
            hn = (1.0 - zg) * n + zg * h
            cache.append((x, m, h, zg, r, rh, n))
            h = m * hn + (1.0 - m) * h
        else:
            a = x @ W + h @ U + b
            i_g, f_g, o_g = expit(a[:, :H]), expit(a[:, H:2 * H]), expit(a[:, 2 * H:3 * H])
            g_g = np.tanh(a[:, 3 * H:])
            cn = f_g * c + i_g * g_g
            tc = np.tanh(cn)
            hn = o_g * tc
            cache.append((x, m, h, c, i_g, f_g, o_g, g_g, tc))
            h = m * hn + (1.0 - m) * h
            c = m * cn + (1.0 - m) * c
    z = h @ params["v"] + params["c"][0]
    if y is None:
        return z

    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + _l2(params, l2)
    dz = (expit(z) - y) / len(y)
    grads = {"v": h.T @ dz + l2 * params["v"], "c": np.array([dz.sum()])}
    dW, dU, db, dE = np.zeros_like(W), np.zeros_like(U), np.zeros_like(b), np.zeros_like(E)
    dh = np.outer(dz, params["v"])
    dc = np.zeros_like(dh)
    for t in reversed(range(steps)):
        if kind == "gru":
            x, m, hp, zg, r, rh, n = cache[t]
            dhn = m * dh
            dh_prev = (1.0 - m) * dh + dhn * zg
            dan = dhn * (1.0 - zg) * (1.0 - n * n)
            dU[:, 2 * H:] += rh.T @ dan
            drh = dan @ U[:, 2 * H:].T
            dh_prev += drh * r
            daz = dhn * (hp - n) * zg * (1.0 - zg)
            dar = drh * hp * r * (1.0 - r)
            dzr = np.hstack([daz, dar])
            dU[:, :2 * H] += hp.T @ dzr
            dh_prev += dzr @ U[:, :2 * H].T
            dgx = np.hstack([daz, dar, dan])
        else:
            x, m, hp, cp, i_g, f_g, o_g, g_g, tc = cache[t]
            dhn = m * dh
            dcn = m * dc + dhn * o_g * (1.0 - tc * tc)
            dgx = np.hstack([
                dcn * g_g * i_g * (1.0 - i_g),
                dcn * cp * f_g * (1.0 - f_g),
                dhn * tc * o_g * (1.0 - o_g),
                dcn * i_g * (1.0 - g_g * g_g),
            ])
            dc = (1.0 - m) * dc + dcn * f_g
            dU += hp.T @ dgx
            dh_prev = (1.0 - m) * dh + dgx @ U.T
        dW += x.T @ dgx
        db += dgx.sum(axis=0)
        np.add.at(dE, ids[:, t], dgx @ W.T)
        dh = dh_prev
    grads.update(W=dW + l2 * W, U=dU + l2 * U, b=db, E=dE + l2 * E)
    return loss, grads


def forward(kind, params, X) -> np.ndarray:
    """Logits for a batch."""
    if kind in FEEDFORWARD_KINDS:
        return _feedforward(kind, params, X)
    return _recurrent(kind, params, X)


def loss_and_grads(kind, params, X, y, l2=0.0):
    y = np.asarray(y, dtype=np.float64)
    if kind in FEEDFORWARD_KINDS:
        return _feedforward(kind, params, X, y, l2)
    return _recurrent(kind, params, X, y, l2)


def _fit(kind, X, y, n_features, cfg: TrainConfig) -> NeuralModel:
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(kind, n_features, cfg, rng)
    y = np.asarray(y, dtype=np.float64)
    history = run_sgd(
        params,
        lambda p, idx: loss_and_grads(kind, p, X[idx], y[idx], cfg.l2_penalty),
        lambda p: loss_and_grads(kind, p, X, y, cfg.l2_penalty)[0],
        X.shape[0], cfg, rng,
    )
    return NeuralModel(kind, params, cfg, history)


def _vocab_size(train, X, vocab_size):
    if vocab_size:
        return vocab_size
    if getattr(train, "vocab_size", 0):
        return train.vocab_size
    return int(X.max()) + 1 if X.size else 2


def train_feedforward(train, cfg: TrainConfig, y=None, representation: str | None = None,
                      vocab_size: int | None = None) -> NeuralModel:
    """Dense ReLU network on bag-of-words counts or mean-pooled token embeddings."""
    rep = representation or getattr(train, "representation", BOW)
    X, y = as_xy(train, y)
    if rep == BOW:
        X = sp.csr_matrix(X, dtype=np.float64)
        return _fit("dnn-bow", X, y, X.shape[1], cfg)
    if rep == SEQ:
        X = np.asarray(X, dtype=np.int64)
        return _fit("dnn-seq", X, y, _vocab_size(train, X, vocab_size), cfg)
    raise ValueError(f"unknown representation {rep!r}")


def train_recurrent(train, kind: str, cfg: TrainConfig, y=None, vocab_size: int | None = None) -> NeuralModel:
    """GRU or LSTM over token-id sequences, trained by backpropagation through time."""
    if kind not in RECURRENT_KINDS:
        raise ValueError(f"kind must be one of {RECURRENT_KINDS}")
    if getattr(train, "representation", SEQ) != SEQ:
        raise ValueError("recurrent models need the sequential representation")
    X, y = as_xy(train, y)
    X = np.asarray(X, dtype=np.int64)
    if X.size == 0 or not (X != PAD).any():
        raise ValueError("every training sequence is empty")
    return _fit(kind, X, y, _vocab_size(train, X, vocab_size), cfg)
