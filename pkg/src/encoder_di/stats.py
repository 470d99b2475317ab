"""One-sided Welch t-test with Student-t tail probabilities from the incomplete beta function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDof, TooFewSamples

_CF_TINY = 1e-300
_CF_EPS = 1e-16
_CF_MAX_ITER = 50_000


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b) by the modified Lentz method."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _ibeta(a: float, b: float, x: float, y: float, log_x: float, log_y: float) -> float:
    """Regularized I_x(a, b) with y = 1 - x and their logs supplied exactly by the caller."""
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = a * log_x + b * log_y - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, y) / b


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    y = 1.0 - x
    return _ibeta(a, b, x, y, math.log(x) if x > 0 else -math.inf, math.log(y) if y > 0 else -math.inf)


def student_t_sf(t: float, dof: float) -> float:
    """P(T > t) for Student's t with ``dof`` degrees of freedom."""
    if not (dof > 0) or math.isnan(dof):
        raise InvalidDof(f"degrees of freedom must be > 0, got {dof}")
    t = float(t)
    if math.isnan(t):
        return math.nan
    if t == 0.0:
        return 0.5
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    if math.isinf(dof):
        return 0.5 * math.erfc(t / math.sqrt(2.0))
    # x = dof / (dof + t^2), 1 - x = t^2 / (dof + t^2), both formed without cancellation
    x = dof / (dof + t2)
    y = t2 / (dof + t2)
    log_x = -math.log1p(t2 / dof)
    log_y = math.log(t2) - math.log(dof + t2) if t2 < 1e300 else -math.log1p(dof / t2)
    tail = 0.5 * _ibeta(0.5 * dof, 0.5, x, y, log_x, log_y)
    return tail if t > 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    dof: float
    p_value: float
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    # standardized mean difference with pooled sample variance, kept for comparison
    effect_size: float
    degenerate: bool = False


def welch_one_sided(a, b) -> TTestResult:
    """Test H0: mean(a) <= mean(b) against mean(a) > mean(b).

    Uses unequal sample variances and Welch-Satterthwaite degrees of freedom.
    When both samples have zero variance the statistic is infinite (or zero
    when the means agree) and the result is flagged ``degenerate``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n_a, n_b = a.size, b.size
    if n_a < 2 or n_b < 2:
        raise TooFewSamples(f"each sample needs at least 2 values, got {n_a} and {n_b}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    mean_a, mean_b = float(a.mean()), float(b.mean())
    var_a, var_b = float(a.var(ddof=1)), float(b.var(ddof=1))
    diff = mean_a - mean_b
    pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / (n_a + n_b - 2)
    effect = diff / math.sqrt(pooled) if pooled > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))

    se_a, se_b = var_a / n_a, var_b / n_b
    se2 = se_a + se_b
    if se2 == 0.0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        dof = float(n_a + n_b - 2)
        p = 0.5 if diff == 0 else (0.0 if diff > 0 else 1.0)
        return TTestResult(t, dof, p, n_a, n_b, mean_a, mean_b, var_a, var_b, effect, True)
    t = diff / math.sqrt(se2)
    # shares of se2 keep the dof formula scale-free, so tiny variances cannot underflow
    w_a, w_b = se_a / se2, se_b / se2
    dof = 1.0 / (w_a * w_a / (n_a - 1) + w_b * w_b / (n_b - 1))
    p = min(1.0, max(0.0, student_t_sf(t, dof)))
    return TTestResult(t, dof, p, n_a, n_b, mean_a, mean_b, var_a, var_b, effect)
