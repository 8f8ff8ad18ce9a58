"""Training configuration and the versioned defaults file."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def _defaults_text() -> str:
    return resources.files("vaxnet.data").joinpath("defaults.json").read_text("utf-8")


def load_defaults() -> dict:
    return json.loads(_defaults_text())


def defaults_hash() -> str:
    return hashlib.sha256(_defaults_text().encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 32
    l2_penalty: float = 1e-4
    seed: int = 0
    hidden_dims: tuple[int, ...] = (64,)
    embedding_dim: int = 32
    max_grad_norm: float | None = None
    momentum: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_grad_norm is not None and self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be > 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown training option(s): {sorted(unknown)}")
        raw = dict(raw)
        if "hidden_dims" in raw:
            raw["hidden_dims"] = tuple(int(h) for h in raw["hidden_dims"])
        return cls(**raw)

    @classmethod
    def defaults(cls, group: str = "linear", **overrides) -> "TrainConfig":
        base = {k: v for k, v in load_defaults()[group].items() if k in {f.name for f in fields(cls)}}
        base.update(overrides)
        return cls.from_dict(base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = 20
    # None means floor(sqrt(n_features))
    max_features: int | None = None
    bootstrap: bool = True
    min_samples_split: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")

    @classmethod
    def from_dict(cls, raw: dict) -> "ForestConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown forest option(s): {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def defaults(cls, **overrides) -> "ForestConfig":
        base = dict(load_defaults()["forest"])
        base.update(overrides)
        return cls.from_dict(base)

    def to_dict(self) -> dict:
        return asdict(self)
