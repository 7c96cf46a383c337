"""Frozen random hidden layer and the concatenation matrix ``T = [X | H]``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DomainError, ShapeError
from .seeding import make_rng

ACTIVATIONS = {
    "sigmoid": expit,
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class FeatureMapConfig:
    """Hidden layer settings.

    Weights are drawn uniformly from ``[-weight_scale, weight_scale]`` and
    biases from ``[0, weight_scale]``.
    """

    hidden_nodes: int = 100
    activation: str = "sigmoid"
    weight_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.hidden_nodes) != self.hidden_nodes or self.hidden_nodes < 1:
            raise ConfigError(f"hidden_nodes must be a positive integer, got {self.hidden_nodes}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}; choose from {sorted(ACTIVATIONS)}")
        if not self.weight_scale > 0:
            raise ConfigError(f"weight_scale must be > 0, got {self.weight_scale}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Random input-to-hidden projection. Arrays are read-only."""

    weights: np.ndarray  # (m, h)
    biases: np.ndarray  # (h,)
    activation: str = "sigmoid"

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.biases, dtype=np.float64).reshape(-1)
        if w.ndim != 2 or w.shape[1] != b.shape[0]:
            raise ShapeError(f"weights {w.shape} and biases {b.shape} disagree")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ConfigError("feature map entries must be finite")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def input_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def hidden_nodes(self) -> int:
        return self.weights.shape[1]

    def output_dim(self, direct_links: bool = True) -> int:
        return self.hidden_nodes + (self.input_dim if direct_links else 0)

    def hidden(self, X: np.ndarray) -> np.ndarray:
        return ACTIVATIONS[self.activation](X @ self.weights + self.biases)


def init_feature_map(m: int, cfg: FeatureMapConfig) -> FeatureMap:
    """Draw a feature map for ``m`` input features, deterministic in ``cfg.seed``."""
    if int(m) != m or m < 1:
        raise ConfigError(f"input dimension must be >= 1, got {m}")
    rng = make_rng(cfg.seed)
    s = cfg.weight_scale
    weights = rng.uniform(-s, s, size=(m, cfg.hidden_nodes))
    biases = rng.uniform(0.0, s, size=cfg.hidden_nodes)
    return FeatureMap(weights, biases, cfg.activation)


def build_T(X, fm: FeatureMap, direct_links: bool = True) -> np.ndarray:
    """Concatenation matrix ``[X | act(X W + b)]``.

    With ``direct_links=False`` only the hidden block is returned, which is
    the feature matrix of an RVFL without direct links (an ELM).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] != fm.input_dim:
        raise ShapeError(f"X has {X.shape[1]} columns, feature map expects {fm.input_dim}")
    if not np.all(np.isfinite(X)):
        raise DomainError("X contains non-finite entries")
    H = fm.hidden(X)
    if not direct_links:
        return H
    return np.hstack([X, H])
