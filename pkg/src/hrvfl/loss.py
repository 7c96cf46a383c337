"""Squared-error and HawkEye losses over scalar residuals.

The HawkEye loss is bounded by ``lam``, has a zero plateau on
``[-eps, eps]`` and is continuously differentiable. Every scalar function
has an array counterpart (``*_values`` / ``*_grads``) that broadcasts over
residuals and parameters; the scalar form delegates to it so the two agree
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "HLossParams",
    "hloss_value",
    "hloss_grad",
    "hloss_values",
    "hloss_grads",
    "sqloss_value",
    "sqloss_grad",
    "sqloss_values",
    "sqloss_grads",
]

# clip for u = a * (|x| - eps): keeps u * exp(-u) at 0 instead of inf * 0
_U_MAX = 1e300


@dataclass(frozen=True)
class HLossParams:
    """Shape of the HawkEye loss.

    Attributes:
        lam: Bound approached by the loss as ``|x| -> inf``.
        a: Shape parameter; larger values make the rise steeper.
        eps: Half-width of the zero-loss insensitive zone. ``0`` is allowed.
    """

    lam: float = 1.0
    a: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        for name in ("lam", "a", "eps"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.lam <= 0:
            raise ConfigError(f"lam must be > 0, got {self.lam}")
        if self.a <= 0:
            raise ConfigError(f"a must be > 0, got {self.a}")
        if self.eps < 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps}")

    @property
    def max_grad(self) -> float:
        """Largest ``|dL/dx|``, reached at ``|x| = eps + 1/a``."""
        return self.lam * self.a * math.exp(-1.0)


def _check_finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("residual must be finite")
    return x


def _shape_arg(x, a, eps) -> np.ndarray:
    """``a * max(|x| - eps, 0)`` clipped to a finite value, as a fresh array."""
    u = np.empty(np.broadcast_shapes(np.shape(x), np.shape(a), np.shape(eps)))
    np.abs(x, out=u)
    u -= eps
    np.maximum(u, 0.0, out=u)
    with np.errstate(over="ignore"):
        u *= a
    return np.minimum(u, _U_MAX, out=u)


def hloss_values(x, lam=1.0, a=1.0, eps=0.0) -> np.ndarray:
    """Elementwise HawkEye loss; parameters broadcast against ``x``.

    With ``u = a * (|x| - eps)`` the loss outside the zone is
    ``lam * (1 - (1 + u) * exp(-u))``, evaluated as
    ``-expm1(-u) - u * exp(-u)`` to stay accurate near the zone edge.
    Values are rounded down so the result is always strictly below ``lam``.
    """
    x = _check_finite(x)
    lam = np.asarray(lam, dtype=np.float64)
    u = _shape_arg(x, np.asarray(a, dtype=np.float64), eps)
    shape = -np.expm1(-u) - u * np.exp(-u)
    return np.minimum(lam * shape, np.nextafter(lam, 0.0))


def hloss_grads(x, lam=1.0, a=1.0, eps=0.0) -> np.ndarray:
    """Elementwise derivative of :func:`hloss_values` with respect to ``x``."""
    return _hloss_grads(_check_finite(x), lam, a, eps)


def _hloss_grads(x, lam, a, eps):
    # no finiteness check: +-inf maps to 0, nan propagates
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    u = _shape_arg(x, a, eps)
    g = np.negative(u, out=np.empty_like(u))
    np.exp(g, out=g)
    g *= u
    g *= np.asarray(lam, dtype=np.float64) * a
    return np.copysign(g, x, out=g)


def _scalar(fn, x, p: HLossParams) -> float:
    if not isinstance(x, (int, float, np.floating, np.integer)):
        raise DomainError(f"expected a real scalar, got {type(x).__name__}")
    return float(fn(np.float64(x), p.lam, p.a, p.eps))


def hloss_value(x: float, p: HLossParams) -> float:
    """HawkEye loss of a single residual.

    >>> round(hloss_value(1.0, HLossParams(lam=1.0, a=1.0, eps=0.0)), 6)
    0.264241
    """
    return _scalar(hloss_values, x, p)


def hloss_grad(x: float, p: HLossParams) -> float:
    """Derivative of the HawkEye loss at a single residual."""
    return _scalar(hloss_grads, x, p)


def sqloss_values(x) -> np.ndarray:
    return _check_finite(x) ** 2


def sqloss_grads(x) -> np.ndarray:
    return 2.0 * _check_finite(x)


def sqloss_value(x: float) -> float:
    """Per-sample squared error ``x**2``."""
    return float(sqloss_values(x))


def sqloss_grad(x: float) -> float:
    return float(sqloss_grads(x))
