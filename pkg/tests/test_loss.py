import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrvfl.errors import ConfigError, DomainError
from hrvfl.loss import (
    HLossParams,
    hloss_grad,
    hloss_grads,
    hloss_value,
    hloss_values,
    sqloss_grad,
    sqloss_value,
)

# (x, lam, a, eps) -> (loss, grad), evaluated with mpmath at 50 digits
MPMATH_ORACLE = [
    ((1.0, 1.0, 1.0, 0.0), (0.26424111765711535681, 0.3678794411714423216)),
    ((2.5, 2.0, 0.5, 0.1), (0.67474546758631077276, 0.36143305429464251614)),
    ((-3.0, 0.5, 1.5, 1.0), (0.40042586326427211404, -0.1120209038276938717)),
    ((0.75, 3.0, 2.0, 0.25), (0.79272335297134607043, 2.2072766470286539296)),
]

params_st = st.builds(
    HLossParams,
    lam=st.floats(0.01, 100.0),
    a=st.floats(0.01, 50.0),
    eps=st.floats(0.0, 5.0),
)


@pytest.mark.parametrize("args,expected", MPMATH_ORACLE)
def test_matches_high_precision_oracle(args, expected):
    x, lam, a, eps = args
    p = HLossParams(lam, a, eps)
    assert hloss_value(x, p) == pytest.approx(expected[0], rel=1e-14)
    assert hloss_grad(x, p) == pytest.approx(expected[1], rel=1e-14)


def test_spec_examples():
    assert hloss_value(0.0, HLossParams(1, 1, 0.5)) == 0.0
    p = HLossParams(1, 1, 0)
    assert hloss_value(1.0, p) == pytest.approx(1 - 2 * math.exp(-1), abs=1e-15)
    assert hloss_value(-1.0, p) == hloss_value(1.0, p)
    assert abs(hloss_value(1e6, HLossParams(2.5, 1, 0)) - 2.5) <= 1e-9
    assert hloss_grad(0.3, HLossParams(1, 2, 0.5)) == 0.0
    assert hloss_grad(1.0, p) == pytest.approx(math.exp(-1), rel=1e-15)
    assert hloss_grad(1e6, p) == 0.0


def test_squared_loss():
    assert sqloss_value(0.0) == 0.0
    assert sqloss_value(3.0) == 9.0
    assert sqloss_value(-3.0) == 9.0
    assert sqloss_grad(3.0) == 6.0
    assert sqloss_grad(-1.5) == -3.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_residual_rejected(bad):
    p = HLossParams()
    with pytest.raises(DomainError):
        hloss_value(bad, p)
    with pytest.raises(DomainError):
        hloss_grad(bad, p)
    with pytest.raises(DomainError):
        sqloss_value(bad)
    with pytest.raises(DomainError):
        hloss_values(np.array([0.0, bad]))


@pytest.mark.parametrize("kw", [dict(lam=0), dict(lam=-1), dict(a=0), dict(eps=-0.1), dict(a=math.nan)])
def test_invalid_params(kw):
    with pytest.raises(ConfigError):
        HLossParams(**kw)


def test_zero_eps_allowed():
    p = HLossParams(eps=0.0)
    assert hloss_value(0.0, p) == 0.0
    assert hloss_value(1e-3, p) > 0.0


def test_vector_form_matches_scalar(rng):
    x = rng.uniform(-10, 10, 500)
    p = HLossParams(1.7, 0.8, 0.3)
    vals = hloss_values(x, p.lam, p.a, p.eps)
    grads = hloss_grads(x, p.lam, p.a, p.eps)
    for xi, v, g in zip(x, vals, grads):
        assert hloss_value(float(xi), p) == v
        assert hloss_grad(float(xi), p) == g


def test_vector_form_broadcasts_parameters():
    x = np.array([[1.0], [2.0]])
    vals = hloss_values(x, np.array([1.0, 2.0]), 1.0, 0.0)
    assert vals.shape == (2, 2)
    assert vals[0, 1] == pytest.approx(2 * vals[0, 0])


def test_huge_residuals_stay_bounded_without_nan():
    x = np.array([1e300, -1e300, 1e308])
    v = hloss_values(x, 3.0, 50.0, 0.0)
    g = hloss_grads(x, 3.0, 50.0, 0.0)
    assert np.all(v < 3.0) and np.all(v > 3.0 - 1e-12)
    assert np.all(g == 0.0)


@given(x=st.floats(-1e6, 1e6), p=params_st)
def test_symmetry(x, p):
    assert abs(hloss_value(x, p) - hloss_value(-x, p)) <= 1e-12
    assert hloss_grad(x, p) == -hloss_grad(-x, p)


@given(x=st.floats(-1e6, 1e6, allow_subnormal=False), p=params_st)
def test_bounded_and_nonnegative(x, p):
    v = hloss_value(x, p)
    assert 0.0 <= v < p.lam


@given(p=params_st, frac=st.floats(-1.0, 1.0))
def test_insensitive_zone(p, frac):
    x = frac * p.eps
    assert hloss_value(x, p) == 0.0
    assert hloss_grad(x, p) == 0.0


@given(p=params_st, x1=st.floats(0, 100), x2=st.floats(0, 100))
def test_monotone_in_abs_residual(p, x1, x2):
    lo, hi = sorted((x1, x2))
    assert hloss_value(lo, p) <= hloss_value(hi, p)
    assert hloss_value(-lo, p) <= hloss_value(-hi, p)


@given(p=params_st)
def test_gradient_continuous_at_zone_edges(p):
    for edge in (p.eps, -p.eps):
        assert hloss_grad(edge, p) == 0.0
        for side in (1e-9, -1e-9):
            assert abs(hloss_grad(edge + side, p)) <= p.lam * p.a**2 * 1e-9 * 1.0001


def _central_diff(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_finite_differences_match_gradient():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        p = HLossParams(rng.uniform(0.1, 5), rng.uniform(0.1, 3), rng.uniform(0, 2))
        x = rng.uniform(-20, 20)
        # the second derivative jumps at the zone edges; keep the stencil off them
        if abs(abs(x) - p.eps) < 1e-4:
            continue
        fd = _central_diff(lambda z: hloss_value(z, p), x)
        g = hloss_grad(x, p)
        if abs(g) < 1e-3:
            assert abs(fd - g) <= 1e-8
        else:
            assert abs(fd - g) <= 1e-5 * abs(g)
        checked += 1


@pytest.mark.parametrize("lam,a,eps", [(1, 1, 0), (2, 0.5, 0.3), (0.5, 4, 1.0)])
def test_gradient_peaks_at_eps_plus_inverse_a(lam, a, eps):
    p = HLossParams(lam, a, eps)
    xs = np.linspace(eps, eps + 20 / a, 200001)
    g = hloss_grads(xs, lam, a, eps)
    peak = xs[np.argmax(g)]
    assert peak == pytest.approx(eps + 1 / a, abs=2e-4 / a)
    assert g.max() == pytest.approx(p.max_grad, rel=1e-9)
    k = np.argmax(g)
    assert np.all(np.diff(g[: k + 1]) >= 0)
    assert np.all(np.diff(g[k:]) <= 0)
