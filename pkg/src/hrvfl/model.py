"""H-RVFL estimator and the closed-form squared-loss RVFL baseline.

The training objective over output weights ``beta`` is::

    J(beta) = 0.5 * ||beta||^2 + (C / 2) * sum_i L(T_i beta - y_i)

with ``L`` either the HawkEye loss or the squared error. The squared case
has the closed-form minimizer ``(T'T + I/C)^{-1} T'y``; the HawkEye case is
non-convex and is minimized with Nesterov accelerated gradient.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import loss as _loss
from .data import NormStats
from .errors import ConfigError, LinAlgError, ShapeError, TrainingError
from .feature_map import FeatureMap, FeatureMapConfig, build_T, init_feature_map
from .loss import HLossParams
from .optimizer import ConvergenceReport, NAGConfig, nag_minimize, nag_minimize_many

LOSSES = ("hloss", "squared")
MODEL_FORMAT = "hrvfl-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    C: float = 1.0
    loss: str = "hloss"
    hloss: HLossParams = field(default_factory=HLossParams)
    feature: FeatureMapConfig = field(default_factory=FeatureMapConfig)
    direct_links: bool = True
    nag: NAGConfig = field(default_factory=NAGConfig)
    # start NAG from the ridge solution with the same C instead of zeros
    warm_start: bool = False
    # divide the learning rate by a curvature bound of the objective so
    # that ``nag.initial_lr`` is a fraction of the stable step size
    step_scaling: bool = False

    def __post_init__(self):
        if not self.C > 0 or not np.isfinite(self.C):
            raise ConfigError(f"C must be a positive finite number, got {self.C}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            C=float(d["C"]),
            loss=d["loss"],
            hloss=HLossParams(**d["hloss"]),
            feature=FeatureMapConfig(**d["feature"]),
            direct_links=bool(d["direct_links"]),
            nag=NAGConfig(**d["nag"]),
            warm_start=bool(d.get("warm_start", False)),
            step_scaling=bool(d.get("step_scaling", False)),
        )


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Fitted output weights plus everything needed to predict.

    ``report`` is ``None`` for closed-form fits. ``classes`` holds the
    original labels mapped to -1 and +1. ``scaler``, when set, is applied
    to raw inputs before the feature map.
    """

    beta: np.ndarray
    feature_map: FeatureMap
    config: ModelConfig
    classes: tuple = (-1, 1)
    report: Optional[ConvergenceReport] = None
    scaler: Optional[NormStats] = None

    def __post_init__(self):
        beta = np.array(self.beta, dtype=np.float64)
        if beta.shape != (self.feature_map.output_dim(self.config.direct_links),):
            raise ShapeError(f"beta shape {beta.shape} does not match the feature map")
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)

    @property
    def converged(self) -> bool:
        return self.report is None or self.report.reason != "diverged"


# ---------------------------------------------------------------- objective


def _residuals(B, T, y):
    return T @ B - (y if B.ndim == 1 else y[:, None])


def _check_problem(beta, T, y):
    beta = np.asarray(beta, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if T.ndim != 2 or T.shape[0] != y.shape[0] or T.shape[1] != beta.shape[0]:
        raise ShapeError(f"inconsistent shapes: beta {beta.shape}, T {T.shape}, y {y.shape}")
    return beta, T, y


def objective(beta, T, y, cfg: ModelConfig) -> float:
    """``0.5 ||beta||^2 + (C/2) sum_i L(T_i beta - y_i)``."""
    beta, T, y = _check_problem(beta, T, y)
    xi = _residuals(beta, T, y)
    if cfg.loss == "squared":
        data = _loss.sqloss_values(xi).sum()
    else:
        p = cfg.hloss
        data = _loss.hloss_values(xi, p.lam, p.a, p.eps).sum()
    return float(0.5 * beta @ beta + 0.5 * cfg.C * data)


def _grad(B, T, y, C, loss, lam, a, eps):
    xi = _residuals(B, T, y)
    if loss == "squared":
        g = 2.0 * xi
    else:
        g = _loss._hloss_grads(xi, lam, a, eps)
    return B + 0.5 * C * (T.T @ g)


def objective_grad(beta, T, y, cfg: ModelConfig) -> np.ndarray:
    """Gradient ``beta + (C/2) sum_i L'(xi_i) T_i`` over the rows given.

    Pass a subset of rows of ``T`` and ``y`` for a mini-batch gradient; the
    regularizer term is counted once either way.
    """
    beta, T, y = _check_problem(beta, T, y)
    p = cfg.hloss
    return _grad(beta, T, y, cfg.C, cfg.loss, p.lam, p.a, p.eps)


# ---------------------------------------------------------------- training


def encode_labels(y) -> tuple[np.ndarray, tuple]:
    """Map two distinct labels to -1/+1 by sorted order."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {y.shape}")
    classes = np.unique(y)
    if len(classes) != 2:
        raise TrainingError(f"need exactly two classes, found {len(classes)}")
    y_pm = np.where(y == classes[1], 1.0, -1.0)
    return y_pm, tuple(c.item() if hasattr(c, "item") else c for c in classes)


def _prepare(X, y, cfg: ModelConfig):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ShapeError(f"X shape {X.shape} does not match {len(y)} labels")
    if X.shape[0] < 2:
        raise TrainingError("need at least two samples")
    y_pm, classes = encode_labels(y)
    fm = init_feature_map(X.shape[1], cfg.feature)
    T = build_T(X, fm, cfg.direct_links)
    return T, y_pm, classes, fm


def ridge_solve(T, y, C: float) -> np.ndarray:
    """Solve ``(T'T + I/C) beta = T'y`` by Cholesky factorization."""
    T = np.asarray(T, dtype=np.float64)
    A = T.T @ T
    A[np.diag_indices_from(A)] += 1.0 / C
    try:
        beta = scipy.linalg.solve(A, T.T @ y, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise LinAlgError(f"ridge solve failed: {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise LinAlgError("ridge solve produced non-finite weights")
    return beta


def fit_ridge(X, y, cfg: ModelConfig) -> TrainedModel:
    """Closed-form squared-loss RVFL (or ELM when ``direct_links`` is off)."""
    T, y_pm, classes, fm = _prepare(X, y, cfg)
    beta = ridge_solve(T, y_pm, cfg.C)
    return TrainedModel(beta, fm, replace(cfg, loss="squared"), classes, None)


def curvature_bound(T, C, loss: str = "hloss", lam=1.0, a=1.0) -> np.ndarray:
    """Upper bound ``1 + (C/2) * k * ||T||_2^2`` on the Hessian norm.

    ``k`` bounds the second derivative of the loss: ``lam * a**2`` for the
    HawkEye loss and 2 for the squared loss. Broadcasts over ``C``,
    ``lam`` and ``a``.
    """
    k = 2.0 if loss == "squared" else np.asarray(lam, dtype=np.float64) * np.asarray(a, dtype=np.float64) ** 2
    s = np.linalg.norm(np.asarray(T, dtype=np.float64), 2) if min(np.shape(T)) > 0 else 0.0
    return 1.0 + 0.5 * np.asarray(C, dtype=np.float64) * k * s * s


def fit_hrvfl(X, y, cfg: ModelConfig) -> TrainedModel:
    """Minimize the objective with NAG (works for either loss)."""
    T, y_pm, classes, fm = _prepare(X, y, cfg)
    p = cfg.hloss

    scale = 1.0 / float(curvature_bound(T, cfg.C, cfg.loss, p.lam, p.a)) if cfg.step_scaling else 1.0

    def grad(beta, batch):
        if batch is None:
            g = _grad(beta, T, y_pm, cfg.C, cfg.loss, p.lam, p.a, p.eps)
        else:
            g = _grad(beta, T[batch], y_pm[batch], cfg.C, cfg.loss, p.lam, p.a, p.eps)
        # scaling the gradient is the same as scaling the step
        return g * scale if cfg.step_scaling else g

    init = ridge_solve(T, y_pm, cfg.C) if cfg.warm_start else np.zeros(T.shape[1])
    beta, report = nag_minimize(grad, init, cfg.nag, n_samples=T.shape[0])
    return TrainedModel(beta, fm, cfg, classes, report)


def fit(X, y, cfg: ModelConfig) -> TrainedModel:
    """Closed form for the squared loss, NAG for the HawkEye loss."""
    if cfg.loss == "squared":
        return fit_ridge(X, y, cfg)
    return fit_hrvfl(X, y, cfg)


def fit_hrvfl_grid(
    X,
    y,
    base: ModelConfig,
    points: Sequence[tuple[float, HLossParams]],
) -> list[TrainedModel]:
    """Fit one HawkEye model per ``(C, params)`` pair on a shared feature map.

    All problems run in lockstep as columns of one parameter matrix, which
    is much faster than separate fits. Columns that diverge come back with
    ``report.reason == "diverged"``.
    """
    if not points:
        return []
    T, y_pm, classes, fm = _prepare(X, y, base)
    C = np.array([c for c, _ in points], dtype=np.float64)
    lam = np.array([p.lam for _, p in points])
    a = np.array([p.a for _, p in points])
    eps = np.array([p.eps for _, p in points])

    scale = 1.0 / curvature_bound(T, C, "hloss", lam, a) if base.step_scaling else None

    def grad(B, batch, cols):
        args = (C[cols], "hloss", lam[cols], a[cols], eps[cols])
        if batch is None:
            g = _grad(B, T, y_pm, *args)
        else:
            g = _grad(B, T[batch], y_pm[batch], *args)
        return g if scale is None else g * scale[cols]

    if base.warm_start:
        init = np.column_stack([ridge_solve(T, y_pm, c) for c in C])
    else:
        init = np.zeros((T.shape[1], len(points)))
    B, reports = nag_minimize_many(grad, init, base.nag, n_samples=T.shape[0])
    return [
        TrainedModel(B[:, j], fm, replace(base, C=float(c), loss="hloss", hloss=p), classes, reports[j])
        for j, (c, p) in enumerate(points)
    ]


# ---------------------------------------------------------------- inference


def sign_labels(scores) -> np.ndarray:
    """Sign with ``sign(0) = +1``."""
    return np.where(np.asarray(scores) >= 0, 1.0, -1.0)


def decision_function(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if model.scaler is not None:
        X = model.scaler.transform(X)
    T = build_T(X, model.feature_map, model.config.direct_links)
    return T @ model.beta


def predict_signs(model: TrainedModel, X) -> np.ndarray:
    return sign_labels(decision_function(model, X))


def predict(model: TrainedModel, X) -> np.ndarray:
    """Predicted labels in the original label space."""
    s = predict_signs(model, X)
    return np.asarray(model.classes)[(s > 0).astype(int)]


def accuracy(model: TrainedModel, X, y) -> float:
    return float(np.mean(predict(model, X) == np.asarray(y)))


# ---------------------------------------------------------------- persistence


def model_to_dict(model: TrainedModel) -> dict:
    fm = model.feature_map
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "classes": list(model.classes),
        "feature_map": {
            "activation": fm.activation,
            "weights": fm.weights.tolist(),
            "biases": fm.biases.tolist(),
        },
        "beta": model.beta.tolist(),
        "report": None if model.report is None else asdict(model.report),
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ConfigError("not a serialized H-RVFL model")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {d.get('version')}")
    f = d["feature_map"]
    fm = FeatureMap(np.array(f["weights"], dtype=np.float64), f["biases"], f["activation"])
    rep = d.get("report")
    scaler = d.get("scaler")
    return TrainedModel(
        np.array(d["beta"], dtype=np.float64),
        fm,
        ModelConfig.from_dict(d["config"]),
        tuple(d["classes"]),
        None if rep is None else ConvergenceReport(**rep),
        None if scaler is None else NormStats.from_dict(scaler),
    )


def save_model(model: TrainedModel, path) -> None:
    """Write the model as JSON; floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
