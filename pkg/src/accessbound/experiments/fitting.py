"""Sigmoid and linear fits for accessibility curves."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

_W_MIN = 1e-3


@dataclass
class SigmoidFit:
    """``rate(n) = floor + (ceiling - floor) / (1 + exp((n - midpoint) / scale))`` with floor = 0."""

    midpoint: float
    scale: float
    ceiling: float
    floor: float
    n50: float
    r2: float
    degenerate: bool
    extrapolated: bool

    def predict(self, n):
        n = np.asarray(n, dtype=np.float64)
        return self.floor + (self.ceiling - self.floor) * _logistic(n, self.midpoint, self.scale)

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in asdict(self).items()}


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float


def _logistic(n, n0, w):
    # 1 / (1 + exp((n - n0) / w)) without overflow warnings
    z = np.clip((n - n0) / w, -700.0, 700.0)
    return 1.0 / (1.0 + np.exp(z))


def _r2(y, yhat) -> float:
    sse = float(((y - yhat) ** 2).sum())
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        return 1.0 if sse == 0.0 else 0.0
    return 1.0 - sse / sst


def sigmoid_fit(ns, rates) -> SigmoidFit:
    """Least-squares fit of ``c / (1 + exp((n - n0) / w))``.

    A coarse grid over ``(n0, w, c)`` seeds a bounded trust-region refinement.
    ``n50`` is where the curve crosses 0.5 (``nan`` if ``c <= 0.5``). Data that
    never crosses 0.5 is flagged ``degenerate``; an ``n50`` outside the
    sampled range is flagged ``extrapolated``.
    """
    x = np.asarray(ns, dtype=np.float64)
    y = np.asarray(rates, dtype=np.float64)
    if x.shape != y.shape or len(x) < 4:
        raise ValueError("sigmoid_fit needs at least 4 (n, rate) points")
    lo, hi = float(x.min()), float(x.max())
    span = max(hi - lo, 1.0)
    degenerate = bool((y >= 0.5).all() or (y <= 0.5).all())

    n0_grid = np.linspace(lo - span, hi + span, 121)
    w_grid = np.geomspace(0.05, 2.0 * span, 40)
    c_grid = np.linspace(0.55, 1.0, 10)
    L = _logistic(x[None, None, :], n0_grid[:, None, None], w_grid[None, :, None])
    best = (math.inf, None)
    for c in c_grid:
        sse = ((c * L - y) ** 2).sum(axis=2)
        i, j = np.unravel_index(np.argmin(sse), sse.shape)
        if sse[i, j] < best[0]:
            best = (float(sse[i, j]), (n0_grid[i], w_grid[j], c))
    p0 = np.array(best[1], dtype=np.float64)
    bounds_lo = [lo - 10.0 * span, _W_MIN, 0.0]
    bounds_hi = [hi + 10.0 * span, 10.0 * span, 1.5]
    p0 = np.clip(p0, np.array(bounds_lo) + 1e-9, np.array(bounds_hi) - 1e-9)
    res = least_squares(lambda p: p[2] * _logistic(x, p[0], p[1]) - y, p0,
                        bounds=(bounds_lo, bounds_hi), method="trf", xtol=1e-14, ftol=1e-14,
                        gtol=1e-14, max_nfev=2000)
    n0, w, c = (float(v) for v in res.x)
    if ((c * _logistic(x, n0, w) - y) ** 2).sum() > best[0]:
        n0, w, c = (float(v) for v in p0)
    yhat = c * _logistic(x, n0, w)
    n50 = n0 + w * math.log(2.0 * c - 1.0) if c > 0.5 else math.nan
    extrapolated = degenerate or not (math.isfinite(n50) and lo <= n50 <= hi)
    return SigmoidFit(n0, w, c, 0.0, n50, _r2(y, yhat), degenerate, extrapolated)


def slope_fit(xs, ys) -> LinearFit:
    """Ordinary least squares ``y = slope * x + intercept``."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2 or x.shape != y.shape:
        raise ValueError("slope_fit needs at least two paired points")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("slope_fit needs at least two distinct x values")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    return LinearFit(slope, intercept, _r2(y, slope * x + intercept))
