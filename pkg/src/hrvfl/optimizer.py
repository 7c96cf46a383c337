"""Nesterov accelerated gradient with exponential learning-rate decay.

One iteration ``t`` (counted from 1) performs::

    look = beta_t + r * v_t
    g_t = grad(look)
    v_{t+1} = r * v_t - lr_t * g_t
    beta_{t+1} = beta_t + v_{t+1}
    lr_{t+1} = lr_t * exp(-decay * t)

The look-ahead coefficient is the momentum ``r`` itself. Because the decay
exponent grows with ``t`` the schedule shrinks faster than geometrically,
so ``decay`` should stay small.

Parameters may be a vector ``(d,)`` or a matrix ``(d, G)`` of ``G``
independent problems sharing one learning-rate schedule and one batch
sequence; :func:`nag_minimize_many` freezes each column as soon as it
meets the tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .seeding import make_rng

STOP_TOLERANCE = "tolerance"
STOP_MAX_ITERS = "max_iters"
STOP_DIVERGED = "diverged"


@dataclass(frozen=True)
class NAGConfig:
    """Optimizer hyperparameters. ``batch_size=None`` means full batch."""

    momentum: float = 0.9
    initial_lr: float = 0.01
    decay: float = 1e-4
    max_iters: int = 1000
    tol: float = 1e-6
    batch_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not self.initial_lr > 0:
            raise ConfigError(f"initial_lr must be > 0, got {self.initial_lr}")
        if not self.decay >= 0:
            raise ConfigError(f"decay must be >= 0, got {self.decay}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.batch_size is not None and (int(self.batch_size) != self.batch_size or self.batch_size < 1):
            raise ConfigError(f"batch_size must be a positive integer or None, got {self.batch_size}")


@dataclass(frozen=True, eq=False)
class NAGState:
    """Iterate after ``iter`` completed steps; ``lr`` is the rate for the next one."""

    beta: np.ndarray
    velocity: np.ndarray
    lr: float
    iter: int = 0

    @classmethod
    def initial(cls, beta0, cfg: NAGConfig) -> "NAGState":
        beta0 = np.array(beta0, dtype=np.float64)
        return cls(beta0, np.zeros_like(beta0), float(cfg.initial_lr), 0)


@dataclass(frozen=True)
class ConvergenceReport:
    reason: str
    iters: int
    final_step_norm: float
    final_lr: float

    def to_record(self) -> str:
        """One-line JSON record."""
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_record(cls, line: str) -> "ConvergenceReport":
        d = json.loads(line)
        return cls(str(d["reason"]), int(d["iters"]), float(d["final_step_norm"]), float(d["final_lr"]))


def _advance(state: NAGState, g: np.ndarray, cfg: NAGConfig) -> NAGState:
    v = cfg.momentum * state.velocity - state.lr * g
    t = state.iter + 1
    return NAGState(state.beta + v, v, state.lr * math.exp(-cfg.decay * t), t)


def nag_step(state: NAGState, grad_fn: Callable[[np.ndarray], np.ndarray], cfg: NAGConfig) -> NAGState:
    """Take one Nesterov step; raises :class:`DivergenceError` on a non-finite gradient."""
    look = state.beta + cfg.momentum * state.velocity
    g = np.asarray(grad_fn(look), dtype=np.float64)
    if g.shape != state.beta.shape:
        raise ShapeError(f"gradient shape {g.shape} != parameter shape {state.beta.shape}")
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite gradient at iteration {state.iter + 1}", state)
    return _advance(state, g, cfg)


def _batch_sampler(cfg: NAGConfig, n_samples: Optional[int]):
    if cfg.batch_size is None:
        return lambda: None
    if n_samples is None:
        raise ConfigError("n_samples is required when batch_size is set")
    if cfg.batch_size > n_samples:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds n_samples {n_samples}")
    if cfg.batch_size == n_samples:
        return lambda: None
    rng = make_rng(cfg.seed)
    return lambda: np.sort(rng.choice(n_samples, size=cfg.batch_size, replace=False))


def nag_minimize_many(
    objective_grad: Callable[[np.ndarray, Optional[np.ndarray], np.ndarray], np.ndarray],
    init: np.ndarray,
    cfg: NAGConfig,
    n_samples: Optional[int] = None,
) -> tuple[np.ndarray, list[ConvergenceReport]]:
    """Run NAG on the columns of ``init`` (shape ``(d, G)``) in lockstep.

    ``objective_grad(B, batch, cols)`` receives only the still-running
    columns: ``B`` has shape ``(d, len(cols))`` and ``cols`` holds their
    indices into ``init``. ``batch`` is an index array of sampled rows or
    ``None`` for the full batch. A fresh batch is drawn every iteration. A column stops
    when its step norm drops below ``cfg.tol`` or when its iterate turns
    non-finite (reported as ``"diverged"`` with its last finite value).
    """
    init = np.array(init, dtype=np.float64)
    if init.ndim != 2:
        raise ShapeError(f"init must be 2-D, got shape {init.shape}")
    if not np.all(np.isfinite(init)):
        raise DivergenceError("initial iterate is not finite")
    G = init.shape[1]
    sample = _batch_sampler(cfg, n_samples)
    state = NAGState.initial(init, cfg)
    active = np.ones(G, dtype=bool)
    reasons = [STOP_MAX_ITERS] * G
    iters = np.full(G, cfg.max_iters)
    step_norms = np.full(G, np.inf)
    final_lr = np.full(G, np.nan)

    while state.iter < cfg.max_iters and active.any():
        batch = sample()
        cols = np.flatnonzero(active)
        look = state.beta[:, cols] + cfg.momentum * state.velocity[:, cols]
        g_active = np.asarray(objective_grad(look, batch, cols), dtype=np.float64)
        if g_active.shape != look.shape:
            raise ShapeError(f"gradient shape {g_active.shape} != parameter shape {look.shape}")
        g = np.zeros_like(state.beta)
        g[:, cols] = g_active
        with np.errstate(invalid="ignore", over="ignore"):
            new = _advance(state, g, cfg)
            ok = np.all(np.isfinite(g), axis=0) & np.all(np.isfinite(new.beta), axis=0)
            step = np.linalg.norm(new.beta - state.beta, axis=0)
        t = new.iter

        bad = active & ~ok
        for j in np.flatnonzero(bad):
            reasons[j] = STOP_DIVERGED
            iters[j] = t
            final_lr[j] = state.lr
        live = active & ok
        beta = np.where(live, new.beta, state.beta)
        vel = np.where(live, new.velocity, state.velocity)
        step_norms[live] = step[live]
        done = live & (step < cfg.tol)
        for j in np.flatnonzero(done):
            reasons[j] = STOP_TOLERANCE
            iters[j] = t
            final_lr[j] = new.lr
        active = live & ~done
        state = NAGState(beta, vel, new.lr, t)

    final_lr[active] = state.lr
    reports = [
        ConvergenceReport(reasons[j], int(iters[j]), float(step_norms[j]), float(final_lr[j]))
        for j in range(G)
    ]
    return state.beta, reports


def nag_minimize(
    objective_grad: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray],
    init,
    cfg: NAGConfig,
    n_samples: Optional[int] = None,
) -> tuple[np.ndarray, ConvergenceReport]:
    """Minimize from a single starting vector.

    ``objective_grad(beta, batch)`` receives a ``(d,)`` vector. Stops once
    ``||beta_{t+1} - beta_t||_2 < cfg.tol`` or after ``cfg.max_iters``
    steps and returns the last iterate. Raises :class:`DivergenceError`
    if the iterate becomes non-finite.
    """
    init = np.array(init, dtype=np.float64)
    if init.ndim != 1:
        raise ShapeError(f"init must be 1-D, got shape {init.shape}")

    def grad2d(B, batch, cols):
        return np.asarray(objective_grad(B[:, 0], batch), dtype=np.float64).reshape(-1, 1)

    beta, (report,) = nag_minimize_many(grad2d, init[:, None], cfg, n_samples)
    if report.reason == STOP_DIVERGED:
        state = NAGState(beta[:, 0], np.zeros_like(beta[:, 0]), report.final_lr, report.iters - 1)
        raise DivergenceError(f"iterate diverged at iteration {report.iters}", state)
    return beta[:, 0], report
