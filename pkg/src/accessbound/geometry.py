"""Volumes of balls, boxes and truncated cones, and packing-number bounds.

Every volume and count is carried as a natural logarithm: counts such as
``(1 + 2r/eps)**768`` do not fit in a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

Norm = Union[str, float]

_CF_MAX_ITER = 10_000
_CF_TOL = 1e-16
_TINY = 1e-300


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


def _norm_p(norm: Norm) -> float:
    """Map a norm selector ('l2', 'linf', 'lp', a number) to its exponent."""
    if isinstance(norm, str):
        key = norm.lower()
        if key == "l2":
            return 2.0
        if key in ("linf", "l_inf", "inf"):
            return math.inf
        if key.startswith("l"):
            try:
                p = float(key[1:])
            except ValueError:
                raise ValueError(f"unknown norm {norm!r}") from None
        else:
            raise ValueError(f"unknown norm {norm!r}")
    else:
        p = float(norm)
    if not p >= 1.0:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    return p


@dataclass(frozen=True)
class Ball:
    dim: int
    radius: float
    norm: Norm = "l2"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        _norm_p(self.norm)


@dataclass(frozen=True)
class Cone:
    """Truncated cone of full opening ``angle`` and ``radius``, apex at 0."""

    dim: int
    radius: float
    angle: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.radius > 0:
            raise ValueError("cone radius must be positive")
        if not 0.0 < self.angle < math.pi:
            raise ValueError("cone angle must lie strictly inside (0, pi)")


@dataclass(frozen=True)
class Box:
    mins: tuple
    maxs: tuple
    dim: int = field(default=0)

    def __post_init__(self):
        mins = tuple(float(v) for v in np.ravel(self.mins))
        maxs = tuple(float(v) for v in np.ravel(self.maxs))
        if len(mins) != len(maxs) or len(mins) == 0:
            raise ValueError("box mins and maxs must be non-empty and equally long")
        if self.dim not in (0, len(mins)):
            raise ValueError("box dim inconsistent with vector lengths")
        if any(not lo < hi for lo, hi in zip(mins, maxs)):
            raise ValueError("box requires mins[i] < maxs[i] for every i")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        object.__setattr__(self, "dim", len(mins))

    @property
    def ranges(self) -> np.ndarray:
        return np.asarray(self.maxs) - np.asarray(self.mins)


SupportGeometry = Union[Ball, Cone, Box]


@dataclass(frozen=True)
class PackingBounds:
    log_lower: float
    log_upper: float

    def __post_init__(self):
        if self.log_lower > self.log_upper:
            raise ValueError("packing bounds out of order")


@dataclass(frozen=True)
class WassersteinCount:
    """Upper bound on a packing count in the space of empirical measures.

    ``log_count`` is ``inf`` once the count overflows a double in log space;
    ``loglog_count`` is always finite for finite inputs.
    """

    log_count: float
    loglog_count: float


@dataclass(frozen=True)
class WassersteinLowerTerm:
    """The ``eps**-d`` growth term of the lower bound.

    The true bound carries an unquantified positive constant, so only the
    log of the growth term is reported.
    """

    log_term: float
    constant_known: bool = False


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0 or math.isinf(x):
        raise ValueError(f"log_gamma requires finite x > 0, got {x}")
    return math.lgamma(x)


def log_beta(a: float, b: float) -> float:
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def _beta_cf(x: float, a: float, b: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def _check_beta_args(x, a, b):
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"incomplete_beta requires 0 <= x <= 1, got {x}")
    if not (a > 0 and b > 0):
        raise ValueError("incomplete_beta requires a > 0 and b > 0")


def _log_beta_direct(x: float, a: float, b: float) -> float:
    # ln[x^a (1-x)^b / a * cf], valid for x below the switch point
    return a * math.log(x) + b * math.log1p(-x) - math.log(a) + math.log(_beta_cf(x, a, b))


def log_incomplete_beta(x: float, a: float, b: float) -> float:
    """ln of the non-regularized incomplete Beta ``B(x; a, b)``."""
    x, a, b = float(x), float(a), float(b)
    _check_beta_args(x, a, b)
    if x == 0.0:
        return -math.inf
    lb = log_beta(a, b)
    if x == 1.0:
        return lb
    if x <= (a + 1.0) / (a + b + 2.0):
        return _log_beta_direct(x, a, b)
    # B(x;a,b) = B(a,b) - B(1-x;b,a)
    rest = _log_beta_direct(1.0 - x, b, a)
    return lb + math.log1p(-math.exp(rest - lb))


def incomplete_beta(x: float, a: float, b: float) -> float:
    """Non-regularized incomplete Beta ``B(x; a, b)``."""
    return math.exp(log_incomplete_beta(x, a, b))


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------


def volume_ball(dim: int, radius: float, norm: Norm = "l2") -> float:
    """ln volume of the ``dim``-dimensional lp ball of the given radius."""
    if dim < 1 or not radius > 0:
        raise ValueError("volume_ball requires dim >= 1 and radius > 0")
    p = _norm_p(norm)
    base = dim * math.log(2.0 * radius)
    if math.isinf(p):
        return base
    return base + dim * log_gamma(1.0 + 1.0 / p) - log_gamma(1.0 + dim / p)


def volume_box(mins, maxs) -> float:
    ranges = np.asarray(maxs, dtype=float) - np.asarray(mins, dtype=float)
    if np.any(ranges <= 0):
        raise ValueError("box requires mins < maxs")
    return float(np.log(ranges).sum())


def log_cone_bracket(dim: int, angle: float) -> float:
    """ln of the bracket ``(1/d) s^(d-1) c + (1/2) B(s^2; (d+1)/2, 1/2)``.

    ``s = sin(angle/2)``, ``c = cos(angle/2)``. The spherical-cap term is the
    symmetric rewrite of ``B(1/2,(d+1)/2) - B(c^2; 1/2,(d+1)/2)`` which avoids
    cancellation for narrow cones.
    """
    half = 0.5 * angle
    s = math.sin(half)
    c = math.cos(half)
    if c <= 0.0:
        conical = -math.inf
    else:
        conical = -math.log(dim) + (dim - 1) * math.log(s) + math.log(c)
    a = 0.5 * (dim + 1)
    if s * s <= (a + 1.0) / (a + 2.5):
        cap = math.log(0.5) + log_incomplete_beta(s * s, a, 0.5)
    else:
        # complement taken from c^2 directly: s^2 rounds to 1 as the angle nears pi
        lb = log_beta(a, 0.5)
        cap = math.log(0.5) + lb + math.log1p(-math.exp(_log_beta_direct(c * c, 0.5, a) - lb))
    return float(np.logaddexp(conical, cap))


def volume_cone(dim: int, radius: float, angle: float) -> float:
    """ln volume of the truncated cone with full opening ``angle``."""
    if dim < 2:
        raise ValueError("volume_cone requires dim >= 2")
    if not 0.0 < angle < math.pi:
        raise ValueError("cone angle must lie strictly inside (0, pi)")
    if not radius > 0:
        raise ValueError("cone radius must be positive")
    return volume_ball(dim - 1, 1.0, "l2") + dim * math.log(radius) + log_cone_bracket(dim, angle)


def cone_fraction(dim: int, angle: float) -> float:
    """ln of the cone-to-ball volume ratio (independent of the radius)."""
    return volume_cone(dim, 1.0, angle) - volume_ball(dim, 1.0, "l2")


def cone_inflated_superset(dim: int, radius: float, angle: float, epsilon: float) -> float:
    """ln volume of a cone containing ``C + (eps/2) B``.

    Pulling the apex back by ``s = eps / (2 sin(angle/2))`` moves every face
    of the infinite cone outward by exactly eps/2; the radius then has to
    grow by ``eps/2 + s`` to cover the spherical cap.
    """
    s = 0.5 * epsilon / math.sin(0.5 * angle)
    return volume_cone(dim, radius + 0.5 * epsilon + s, angle)


def log_volume(geom: SupportGeometry) -> float:
    if isinstance(geom, Ball):
        return volume_ball(geom.dim, geom.radius, geom.norm)
    if isinstance(geom, Cone):
        return volume_cone(geom.dim, geom.radius, geom.angle)
    if isinstance(geom, Box):
        return volume_box(geom.mins, geom.maxs)
    raise TypeError(f"unsupported geometry {type(geom).__name__}")


def log_volume_inflated(geom: SupportGeometry, epsilon: float, norm: Norm = "l2") -> float:
    """ln volume of a body containing ``geom + (eps/2) B_norm``."""
    if isinstance(geom, Ball):
        if _norm_p(geom.norm) != _norm_p(norm):
            # lp balls nest inside the l_inf ball of the same radius
            return geom.dim * math.log(2.0 * geom.radius + epsilon)
        return volume_ball(geom.dim, geom.radius + 0.5 * epsilon, norm)
    if isinstance(geom, Cone):
        if _norm_p(norm) != 2.0:
            raise ValueError("cone inflation is only implemented for the l2 norm")
        return cone_inflated_superset(geom.dim, geom.radius, geom.angle, epsilon)
    if isinstance(geom, Box):
        # any lp ball of radius eps/2 sits inside the cube of side eps
        return volume_box(np.asarray(geom.mins) - 0.5 * epsilon, np.asarray(geom.maxs) + 0.5 * epsilon)
    raise TypeError(f"unsupported geometry {type(geom).__name__}")


# ---------------------------------------------------------------------------
# Packing numbers
# ---------------------------------------------------------------------------


def packing_bounds_ball(dim: int, radius: float, epsilon: float) -> PackingBounds:
    """Volumetric bounds ``(r/eps)^d <= P <= (1 + 2r/eps)^d``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lower = max(0.0, dim * math.log(radius / epsilon))
    upper = dim * math.log1p(2.0 * radius / epsilon)
    return PackingBounds(lower, upper)


def packing_bounds_general(log_volume_body: float, log_volume_inflated: float,
                           dim: int, epsilon: float, norm: Norm = "l2") -> PackingBounds:
    """Bounds from ``|K|/|eps B| <= P(K, eps) <= |K + (eps/2)B| / |(eps/2)B|``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if log_volume_inflated < log_volume_body:
        raise ValueError("inflated body volume is smaller than the body volume")
    lower = log_volume_body - volume_ball(dim, epsilon, norm)
    upper = log_volume_inflated - volume_ball(dim, 0.5 * epsilon, norm)
    return PackingBounds(max(0.0, lower), max(0.0, upper))


def packing_bounds(geom: SupportGeometry, epsilon: float, norm: Norm = "l2") -> PackingBounds:
    """Packing bounds for any supported body, via the volumetric argument."""
    return packing_bounds_general(log_volume(geom), log_volume_inflated(geom, epsilon, norm),
                                  geom.dim, epsilon, norm)


def _log_base_wasserstein(radius: float, epsilon: float, q: float) -> float:
    # ln ln(e + e (2r/eps)^q) = ln(1 + ln(1 + (2r/eps)^q))
    ratio = 2.0 * radius / epsilon
    if math.isinf(q):
        if ratio < 1.0:
            inner = 0.0
        elif ratio == 1.0:
            inner = math.log(2.0)
        else:
            return math.inf
    else:
        inner = float(np.logaddexp(0.0, q * math.log(ratio)))
    return math.log1p(inner)


def packing_wasserstein_upper(dim: int, radius: float, epsilon: float, q: float,
                              convention: str = "2r") -> WassersteinCount:
    """Upper bound on the log packing count of empirical measures under W_q.

    ``convention='2r'`` uses the exponent ``(1 + 2r/eps)^d``;
    ``'4r'`` uses ``(1 + 4r/eps)^d``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not q >= 1:
        raise ValueError("q must be >= 1")
    k = {"2r": 2.0, "4r": 4.0}.get(convention)
    if k is None:
        raise ValueError(f"unknown convention {convention!r}")
    loglog = dim * math.log1p(k * radius / epsilon) + _log_base_wasserstein(radius, epsilon, q)
    log_count = math.exp(loglog) if loglog < 709.0 else math.inf
    return WassersteinCount(log_count, loglog)


def packing_wasserstein_lower(dim: int, epsilon: float) -> WassersteinLowerTerm:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return WassersteinLowerTerm(-dim * math.log(epsilon))


# ---------------------------------------------------------------------------
# Monte-Carlo oracle
# ---------------------------------------------------------------------------


def monte_carlo_cone_fraction(dim: int, angle: float, n_samples: int,
                              seed: int = 0, shards: int = 1, chunk: int = 200_000):
    """Estimate |cone| / |ball| by rejection sampling.

    Points are drawn uniformly in the cube ``[-1, 1]^d``; those inside the
    unit ball are kept until ``n_samples`` ball points have been seen, and
    the fraction lying inside the cone (axis e_1) is returned together with
    its standard error. Each shard has its own child seed, so the result is
    a deterministic function of ``(seed, shards)``.
    """
    cos_half = math.cos(0.5 * angle)
    children = np.random.SeedSequence(seed).spawn(shards)
    per_shard = [n_samples // shards + (i < n_samples % shards) for i in range(shards)]
    hits = 0
    for ss, target in zip(children, per_shard):
        rng = np.random.default_rng(ss)
        seen = 0
        while seen < target:
            pts = rng.uniform(-1.0, 1.0, size=(chunk, dim))
            norm = np.sqrt((pts * pts).sum(axis=1))
            pts, norm = pts[norm <= 1.0], norm[norm <= 1.0]
            take = min(target - seen, len(norm))
            pts, norm = pts[:take], norm[:take]
            hits += int(np.count_nonzero(pts[:, 0] >= norm * cos_half))
            seen += take
    p = hits / n_samples
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / n_samples)
